//! ELEC2 electricity-transfer dataset loading and permutation control.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::regression::TaggedDataset;

/// Number of rows the default configuration is expected to produce.
pub const ELEC2_EXPECTED_ROWS: usize = 3444;

/// Loader configuration. `slots` are half-hour period indices, 1-based:
/// period k covers [(k-1)/48, k/48) of the day, so 9:00-12:00 is 19..=24.
/// The stored file may normalize the period column to [0, 1]; slots are
/// therefore matched by rank among the distinct sorted period values.
#[derive(Debug, Clone)]
pub struct Elec2Config {
    pub slots: Vec<usize>,
    pub drop_constant_prefix: bool,
    /// Tolerance for the constant-prefix comparison; 0 compares exact
    /// stored values.
    pub prefix_epsilon: f64,
}

impl Default for Elec2Config {
    fn default() -> Self {
        Self {
            slots: (19..=24).collect(),
            drop_constant_prefix: true,
            prefix_epsilon: 0.0,
        }
    }
}

/// Outcome of a load: the dataset plus any non-fatal warnings.
#[derive(Debug)]
pub struct Elec2Load {
    pub data: TaggedDataset,
    pub warnings: Vec<String>,
}

const REQUIRED: [&str; 8] = [
    "date",
    "day",
    "period",
    "nswprice",
    "nswdemand",
    "vicprice",
    "vicdemand",
    "transfer",
];

/// Loads the ELEC2 file: filters to the configured half-hour slots, drops
/// the initial constant-transfer prefix, and returns features
/// (nswprice, vicprice, nswdemand, vicdemand) with response transfer and
/// tags 1..N in chronological order. Warns when the row count differs from
/// the expected 3444.
pub fn load_elec2(path: &Path, config: &Elec2Config) -> Result<Elec2Load> {
    if config.slots.is_empty() {
        return Err(Error::domain("slot window must be nonempty"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let mut col = std::collections::HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        col.insert(name.to_ascii_lowercase(), i);
    }
    for name in REQUIRED {
        if !col.contains_key(name) {
            return Err(Error::Parse(format!("missing column {name:?}")));
        }
    }
    let parse = |record: &csv::StringRecord, name: &str, line: u64| -> Result<f64> {
        let idx = col[name];
        record
            .get(idx)
            .ok_or_else(|| Error::Parse(format!("short row at line {line}")))?
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("column {name:?} at line {line}: {e}")))
    };

    // (period, features, transfer) in file order.
    let mut rows: Vec<(f64, [f64; 4], f64)> = Vec::new();
    for result in reader.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let period = parse(&record, "period", line)?;
        let features = [
            parse(&record, "nswprice", line)?,
            parse(&record, "vicprice", line)?,
            parse(&record, "nswdemand", line)?,
            parse(&record, "vicdemand", line)?,
        ];
        let transfer = parse(&record, "transfer", line)?;
        rows.push((period, features, transfer));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    // Map period values to half-hour slot numbers 1..=48. A file covering
    // the full day has 48 distinct values and the rank among them is the
    // slot, whatever normalization the column uses. Partial files fall back
    // to reading integer periods directly, or fractions of a day as
    // floor(v * 48) + 1.
    let mut distinct: Vec<f64> = rows.iter().map(|r| r.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let integer_like = distinct.iter().all(|v| v.fract() == 0.0 && *v >= 1.0);
    let slot_of = move |period: f64| -> usize {
        if distinct.len() == 48 {
            distinct.partition_point(|&v| v < period) + 1
        } else if integer_like {
            period as usize
        } else {
            ((period.clamp(0.0, 1.0) * 48.0).floor() as usize + 1).min(48)
        }
    };

    let mut filtered: Vec<(&[f64; 4], f64)> = rows
        .iter()
        .filter(|(p, _, _)| config.slots.contains(&slot_of(*p)))
        .map(|(_, x, y)| (x, *y))
        .collect();
    if filtered.is_empty() {
        return Err(Error::EmptyDataset);
    }

    if config.drop_constant_prefix {
        let first = filtered[0].1;
        let change = filtered
            .iter()
            .position(|(_, y)| (y - first).abs() > config.prefix_epsilon);
        match change {
            // Rows are removed until transfer first changes, so the first
            // retained row is the first one that differs.
            Some(idx) => filtered.drain(..idx),
            None => {
                return Err(Error::domain(
                    "transfer is constant over the entire window",
                ))
            }
        };
    }

    let mut warnings = Vec::new();
    if filtered.len() != ELEC2_EXPECTED_ROWS {
        warnings.push(format!(
            "loaded {} rows, expected {ELEC2_EXPECTED_ROWS}",
            filtered.len()
        ));
    }
    let mut data = TaggedDataset::new(4);
    for (i, (x, y)) in filtered.iter().enumerate() {
        data.push(x.as_slice(), *y, (i + 1) as f64)?;
    }
    Ok(Elec2Load { data, warnings })
}

/// Uniformly random permutation of the (x, y) payloads (Fisher-Yates); tags
/// are reassigned 1..N so the permuted series reads as a fresh time series.
pub fn permute_dataset(data: &TaggedDataset, rng: &mut ChaCha8Rng) -> Result<TaggedDataset> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut out = TaggedDataset::new(data.dim());
    for (new_pos, &old) in order.iter().enumerate() {
        out.push(data.x(old), data.y(old), (new_pos + 1) as f64)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use std::io::Write;

    fn write_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "date,day,period,nswprice,nswdemand,vicprice,vicdemand,transfer\n";

    fn row(period: usize, transfer: f64) -> String {
        // Period stored as the start-of-slot fraction of the day.
        format!(
            "0.1,2,{},0.05,0.2,0.003,0.42,{}\n",
            (period - 1) as f64 / 48.0,
            transfer
        )
    }

    #[test]
    fn drops_constant_prefix() {
        // Ten in-window rows; transfer constant for the first three.
        let mut content = HEADER.to_string();
        for i in 0..10 {
            let transfer = if i < 3 { 0.5 } else { 0.5 + 0.01 * i as f64 };
            content.push_str(&row(19 + (i % 6), transfer));
        }
        let f = write_file(&content);
        let load = load_elec2(f.path(), &Elec2Config::default()).unwrap();
        assert_eq!(load.data.len(), 7);
        assert!((load.data.y(0) - 0.53).abs() < 1e-12);
        assert_eq!(load.data.tags(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert!(!load.warnings.is_empty());
    }

    #[test]
    fn out_of_window_rows_rejected() {
        let mut content = HEADER.to_string();
        for i in 0..5 {
            content.push_str(&row(1 + i, 0.1 * i as f64));
        }
        let f = write_file(&content);
        // All periods rank below slot 19 only if the file also contains the
        // higher slots; with only 5 distinct values everything ranks 1..5.
        let err = load_elec2(f.path(), &Elec2Config::default());
        assert!(matches!(err, Err(Error::EmptyDataset)));
    }

    #[test]
    fn slot_ranks_survive_normalization() {
        // Periods stored as raw integers instead of fractions of a day.
        let mut content = HEADER.to_string();
        for p in 1..=48 {
            content.push_str(&format!("0.0,1,{p},0.1,0.2,0.3,0.4,{}\n", p as f64 * 0.01));
        }
        let f = write_file(&content);
        let load = load_elec2(
            f.path(),
            &Elec2Config {
                drop_constant_prefix: false,
                ..Elec2Config::default()
            },
        )
        .unwrap();
        assert_eq!(load.data.len(), 6);
        assert!((load.data.y(0) - 0.19).abs() < 1e-12);
        assert!((load.data.y(5) - 0.24).abs() < 1e-12);
    }

    #[test]
    fn missing_column_and_bad_numeric() {
        let f = write_file("date,day,period,nswprice,nswdemand,vicprice,vicdemand\n0,1,2,3,4,5,6\n");
        assert!(matches!(
            load_elec2(f.path(), &Elec2Config::default()),
            Err(Error::Parse(_))
        ));
        let mut content = HEADER.to_string();
        content.push_str("0.1,2,0.4,abc,0.2,0.3,0.4,0.5\n");
        let f = write_file(&content);
        assert!(load_elec2(f.path(), &Elec2Config::default()).is_err());
    }

    #[test]
    fn features_in_declared_order() {
        let mut content = HEADER.to_string();
        content.push_str(&row(20, 0.7));
        content.push_str(&row(20, 0.8));
        let f = write_file(&content);
        let load = load_elec2(
            f.path(),
            &Elec2Config {
                drop_constant_prefix: false,
                ..Elec2Config::default()
            },
        )
        .unwrap();
        // (nswprice, vicprice, nswdemand, vicdemand)
        assert_eq!(load.data.x(0), &[0.05, 0.003, 0.2, 0.42]);
    }

    #[test]
    fn permutation_preserves_multiset_and_single_row() {
        let mut data = TaggedDataset::new(1);
        for i in 1..=20 {
            data.push(&[i as f64], (i * i) as f64, i as f64).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let perm = permute_dataset(&data, &mut rng).unwrap();
        assert_eq!(perm.tags(), data.tags());
        let mut orig: Vec<(u64, u64)> = (0..20)
            .map(|i| (data.x(i)[0] as u64, data.y(i) as u64))
            .collect();
        let mut shuffled: Vec<(u64, u64)> = (0..20)
            .map(|i| (perm.x(i)[0] as u64, perm.y(i) as u64))
            .collect();
        orig.sort_unstable();
        shuffled.sort_unstable();
        assert_eq!(orig, shuffled);

        let mut single = TaggedDataset::new(1);
        single.push(&[1.0], 2.0, 1.0).unwrap();
        let p = permute_dataset(&single, &mut rng).unwrap();
        assert_eq!(p, single);
    }

    #[test]
    fn permutation_is_uniform() {
        // Chi-square over all 120 permutations of 5 elements against the
        // sort-by-random-key null, 10^4 draws.
        let mut data = TaggedDataset::new(1);
        for i in 0..5 {
            data.push(&[i as f64], i as f64, (i + 1) as f64).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let mut counts = std::collections::HashMap::new();
        let draws = 10_000;
        for _ in 0..draws {
            let p = permute_dataset(&data, &mut rng).unwrap();
            let key: Vec<u8> = (0..5).map(|i| p.y(i) as u8).collect();
            *counts.entry(key).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 120);
        let expected = draws as f64 / 120.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 119 degrees of freedom; p > 0.001 corresponds to chi2 < ~173.6.
        assert!(chi2 < 173.6, "chi-square {chi2} too large");
    }
}
