//! Dataset files: a long-format CSV with one row per (observation, product)
//! and a JSON sidecar with dimensions, the seed and optional ground truth.
//!
//! CSV columns are `consumer,trip,category,product,price,lag,chosen`.
//! Indices are 1-based, `lag` and `chosen` are 0/1 and prices carry six
//! fractional digits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Dims, Observation};
use crate::error::{Error, Result};
use crate::params::ParamDraw;

pub const CSV_HEADER: [&str; 7] = ["consumer", "trip", "category", "product", "price", "lag", "chosen"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub dims: Dims,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_params: Option<ParamDraw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_probs: Option<Vec<Vec<f64>>>,
}

pub fn write_dataset_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{}", CSV_HEADER.join(","))?;
    for obs in &dataset.observations {
        for (j, price) in obs.prices.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{:.6},{},{}",
                obs.consumer + 1,
                obs.trip + 1,
                obs.category + 1,
                j + 1,
                price,
                (obs.lag == Some(j)) as u8,
                (obs.chosen == j) as u8,
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_index(field: &str, name: &str, line: u64) -> Result<usize> {
    let v: usize = field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: column `{name}` is not an index: `{field}`")))?;
    if v == 0 {
        return Err(Error::Parse(format!("line {line}: column `{name}` is 1-based")));
    }
    Ok(v - 1)
}

fn parse_flag(field: &str, name: &str, line: u64) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse(format!("line {line}: column `{name}` must be 0/1, got `{other}`"))),
    }
}

/// Parses the long-format CSV; `dims` comes from the sidecar.
pub fn read_dataset_csv<R: Read>(reader: R, dims: &Dims) -> Result<Vec<Observation>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected header `{}`, got `{}`",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    struct Pending {
        key: (usize, usize, usize),
        prices: Vec<f64>,
        lag: Option<usize>,
        chosen: Option<usize>,
        line: u64,
    }

    fn finish(p: Pending, dims: &Dims, out: &mut Vec<Observation>) -> Result<()> {
        let (consumer, trip, category) = p.key;
        if category >= dims.n_categories {
            return Err(Error::Parse(format!("line {}: category {} out of range", p.line, category + 1)));
        }
        if p.prices.len() != dims.n_products(category) {
            return Err(Error::Parse(format!(
                "line {}: category {} has {} product rows, expected {}",
                p.line,
                category + 1,
                p.prices.len(),
                dims.n_products(category)
            )));
        }
        let chosen = p
            .chosen
            .ok_or_else(|| Error::Parse(format!("line {}: no chosen product", p.line)))?;
        out.push(Observation {
            consumer,
            trip,
            category,
            prices: p.prices,
            lag: p.lag,
            chosen,
        });
        Ok(())
    }

    let mut out = Vec::new();
    let mut pending: Option<Pending> = None;
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != CSV_HEADER.len() {
            return Err(Error::Parse(format!("line {line}: expected 7 columns, got {}", record.len())));
        }
        let key = (
            parse_index(&record[0], "consumer", line)?,
            parse_index(&record[1], "trip", line)?,
            parse_index(&record[2], "category", line)?,
        );
        let product = parse_index(&record[3], "product", line)?;
        let price: f64 = record[4]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: bad price `{}`", &record[4])))?;
        let lag = parse_flag(&record[5], "lag", line)?;
        let chosen = parse_flag(&record[6], "chosen", line)?;

        if pending.as_ref().is_some_and(|p| p.key != key) {
            finish(pending.take().unwrap(), dims, &mut out)?;
        }
        let p = pending.get_or_insert_with(|| Pending {
            key,
            prices: Vec::new(),
            lag: None,
            chosen: None,
            line,
        });
        if product != p.prices.len() {
            return Err(Error::Parse(format!("line {line}: products must be listed in order 1..J")));
        }
        p.prices.push(price);
        if lag {
            if p.lag.is_some() {
                return Err(Error::Parse(format!("line {line}: more than one lag indicator set")));
            }
            p.lag = Some(product);
        }
        if chosen {
            if p.chosen.is_some() {
                return Err(Error::Parse(format!("line {line}: more than one chosen product")));
            }
            p.chosen = Some(product);
        }
    }
    if let Some(p) = pending {
        finish(p, dims, &mut out)?;
    }
    Ok(out)
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
pub fn save_dataset(
    dataset: &Dataset,
    seed: Option<u64>,
    true_params: Option<&ParamDraw>,
    dir: &Path,
    stem: &str,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_dataset_csv(dataset, File::create(dir.join(format!("{stem}.csv")))?)?;
    let sidecar = TruthSidecar {
        dims: dataset.dims.clone(),
        seed,
        true_params: true_params.cloned(),
        true_probs: dataset.true_probs.clone(),
    };
    write_json(&dir.join(format!("{stem}.json")), &sidecar)
}

/// Loads a dataset from its CSV; the sidecar defaults to the same path with
/// a `.json` extension.
pub fn load_dataset(csv_path: &Path, sidecar_path: Option<&Path>) -> Result<(Dataset, TruthSidecar)> {
    let default_sidecar = csv_path.with_extension("json");
    let sidecar: TruthSidecar = read_json(sidecar_path.unwrap_or(&default_sidecar))?;
    sidecar.dims.check()?;
    let observations = read_dataset_csv(BufReader::new(File::open(csv_path)?), &sidecar.dims)?;
    if let Some(p) = &sidecar.true_probs {
        if p.len() != observations.len() {
            return Err(Error::dimension("true_probs rows", observations.len(), p.len()));
        }
    }
    let dataset = Dataset {
        dims: sidecar.dims.clone(),
        observations,
        true_probs: sidecar.true_probs.clone(),
    };
    Ok((dataset, sidecar))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Magic prefix of binary draw files.
pub const DRAWS_MAGIC: &[u8; 8] = b"FDDRAWS1";

/// Streams draws to a binary file: the magic bytes, the draw count and the
/// coordinate count as little-endian `u64`, then each draw's values as
/// little-endian `f64` in layout order. Returns the number of draws written.
pub fn write_draws_binary<I>(path: &Path, layout: &crate::params::Layout, n_draws: usize, draws: I) -> Result<usize>
where
    I: IntoIterator<Item = ParamDraw>,
{
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DRAWS_MAGIC)?;
    w.write_all(&(n_draws as u64).to_le_bytes())?;
    w.write_all(&(layout.len() as u64).to_le_bytes())?;
    let mut written = 0;
    for draw in draws.into_iter().take(n_draws) {
        if draw.layout != *layout {
            return Err(Error::dimension("draw layout", layout.len(), draw.values.len()));
        }
        for v in &draw.values {
            w.write_all(&v.to_le_bytes())?;
        }
        written += 1;
    }
    if written != n_draws {
        return Err(Error::dimension("draw count", n_draws, written));
    }
    w.flush()?;
    Ok(written)
}

/// Reads a binary draw file written for `layout`.
pub fn read_draws_binary(path: &Path, layout: &crate::params::Layout) -> Result<Vec<ParamDraw>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DRAWS_MAGIC {
        return Err(Error::Parse(format!("{} is not a draws file", path.display())));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let dim = u64::from_le_bytes(word) as usize;
    if dim != layout.len() {
        return Err(Error::dimension("draws file coordinates", layout.len(), dim));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        out.push(ParamDraw::from_values(*layout, values)?);
    }
    Ok(out)
}

/// Reads draws from a `.json` array of parameter draws or a binary file.
pub fn read_draws(path: &Path, layout: &crate::params::Layout) -> Result<Vec<ParamDraw>> {
    if path.extension().is_some_and(|e| e == "json") {
        let draws: Vec<ParamDraw> = read_json(path)?;
        if let Some(d) = draws.iter().find(|d| d.layout != *layout) {
            return Err(Error::dimension("draw layout", layout.len(), d.values.len()));
        }
        Ok(draws)
    } else {
        read_draws_binary(path, layout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> Dims {
        Dims::new(1, vec![2, 3], 2, 1).unwrap()
    }

    #[test]
    fn csv_layout() {
        let d = Dataset {
            dims: dims(),
            observations: vec![Observation {
                consumer: 0,
                trip: 1,
                category: 1,
                prices: vec![1.5, 0.1, 2.123456],
                lag: Some(2),
                chosen: 0,
            }],
            true_probs: None,
        };
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "consumer,trip,category,product,price,lag,chosen\n\
             1,2,2,1,1.500000,0,1\n1,2,2,2,0.100000,0,0\n1,2,2,3,2.123456,1,0\n"
        );
        let back = read_dataset_csv(&buf[..], &dims()).unwrap();
        assert_eq!(back, d.observations);
    }

    #[test]
    fn rejects_double_choice_and_bad_header() {
        let text = "consumer,trip,category,product,price,lag,chosen\n1,1,1,1,1.0,0,1\n1,1,1,2,1.0,0,1\n";
        assert!(read_dataset_csv(text.as_bytes(), &dims()).is_err());
        let text = "a,b\n1,2\n";
        assert!(read_dataset_csv(text.as_bytes(), &dims()).is_err());
        let text = "consumer,trip,category,product,price,lag,chosen\n1,1,1,1,1.0,0,1\n";
        // category 1 needs two product rows
        assert!(read_dataset_csv(text.as_bytes(), &dims()).is_err());
    }

    #[test]
    fn draws_round_trip_in_both_formats() {
        use crate::params::{Layout, ModelKind};
        let layout = Layout::new(&Dims::new(2, vec![3], 4, 2).unwrap(), ModelKind::Dynamic);
        let draws: Vec<ParamDraw> = (0..3)
            .map(|s| ParamDraw::from_values(layout, (0..layout.len()).map(|c| (s * 100 + c) as f64 * 0.25).collect()).unwrap())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("draws.bin");
        assert_eq!(write_draws_binary(&bin, &layout, 3, draws.clone()).unwrap(), 3);
        assert_eq!(read_draws(&bin, &layout).unwrap(), draws);
        let json = dir.path().join("draws.json");
        write_json(&json, &draws).unwrap();
        assert_eq!(read_draws(&json, &layout).unwrap(), draws);
        let other = Layout::new(&Dims::new(2, vec![3], 4, 2).unwrap(), ModelKind::Static);
        assert!(read_draws(&bin, &other).is_err());
        assert!(write_draws_binary(&bin, &layout, 5, draws).is_err());
    }
}
