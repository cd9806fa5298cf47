//! Reader for the standard whitespace-separated IGRF coefficient table
//! (`g/h n m <epochs...> <sv-label>` header, one `g` or `h` row per
//! coefficient, nT and nT/yr).

use std::path::Path;

use magnmpc_core::igrf::{IgrfCoefficientSet, IgrfTable};

use crate::{io_err, Error, Result};

/// Coefficients shipped with the crate.
pub const BUNDLED_IGRF13: &str = include_str!("../data/igrf13coeffs.txt");

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Igrf { line, message: message.into() }
}

pub fn load_igrf_table(path: &Path) -> Result<IgrfTable> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_igrf_table(&text)
}

pub fn bundled_igrf_table() -> IgrfTable {
    parse_igrf_table(BUNDLED_IGRF13).expect("bundled IGRF table parses")
}

pub fn parse_igrf_table(text: &str) -> Result<IgrfTable> {
    let mut epochs: Option<Vec<f64>> = None;
    let mut rows: Vec<(usize, bool, usize, usize, Vec<f64>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("c/s") {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "g/h" {
            if fields.len() < 5 || fields[1] != "n" || fields[2] != "m" {
                return Err(err(line_no, "malformed header row"));
            }
            // The final column labels the secular variation, not an epoch.
            let parsed = fields[3..fields.len() - 1]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| err(line_no, format!("bad epoch `{f}`"))))
                .collect::<Result<Vec<_>>>()?;
            epochs = Some(parsed);
            continue;
        }
        let Some(ep) = &epochs else {
            return Err(err(line_no, "coefficient row before the header"));
        };
        let is_g = match fields[0] {
            "g" => true,
            "h" => false,
            other => return Err(err(line_no, format!("expected `g` or `h`, found `{other}`"))),
        };
        if fields.len() != 3 + ep.len() + 1 {
            return Err(err(line_no, format!("expected {} values, found {}", ep.len() + 1, fields.len().saturating_sub(3))));
        }
        let n: usize = fields[1].parse().map_err(|_| err(line_no, "bad degree"))?;
        let m: usize = fields[2].parse().map_err(|_| err(line_no, "bad order"))?;
        if n == 0 || m > n {
            return Err(err(line_no, format!("invalid degree/order ({n}, {m})")));
        }
        if !is_g && m == 0 {
            return Err(err(line_no, "h coefficient with order 0"));
        }
        let values = fields[3..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| err(line_no, format!("bad value `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push((line_no, is_g, n, m, values));
    }
    let epochs = epochs.ok_or_else(|| err(0, "missing `g/h n m` header"))?;
    if rows.is_empty() {
        return Err(err(0, "no coefficient rows"));
    }
    let max_degree = rows.iter().map(|r| r.2).max().unwrap_or(1);
    let mut main: Vec<IgrfCoefficientSet> = epochs.iter().map(|&e| IgrfCoefficientSet::zeros(e, max_degree)).collect();
    let mut sv = IgrfCoefficientSet::zeros(*epochs.last().expect("non-empty"), max_degree);
    for (line_no, is_g, n, m, values) in rows {
        for (k, set) in main.iter_mut().enumerate() {
            let (g, h) = (set.g(n, m), set.h(n, m));
            let (g, h) = if is_g { (values[k], h) } else { (g, values[k]) };
            set.set(n, m, g, h).map_err(|e| err(line_no, e.to_string()))?;
        }
        let rate = values[epochs.len()];
        let (gr, hr) = if is_g { (rate, sv.h_rate(n, m)) } else { (sv.g_rate(n, m), rate) };
        sv.set_rate(n, m, gr, hr).map_err(|e| err(line_no, e.to_string()))?;
    }
    Ok(IgrfTable::new(epochs, main, sv)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
# comment
c/s IGRF IGRF SV
g/h n m 2015.0 2020.0 2020-25
g 1 0 -29404.8 -29404.8 5.7
g 1 1 -1450.9 -1450.9 7.4
h 1 1 4652.5 4652.5 -25.9
";

    #[test]
    fn parses_small_table() {
        let t = parse_igrf_table(SMALL).unwrap();
        assert_eq!(t.epochs, vec![2015.0, 2020.0]);
        let c = t.at(2020.0).unwrap();
        assert_eq!(c.g(1, 0), -29404.8);
        assert_eq!(c.h(1, 1), 4652.5);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = SMALL.replace("h 1 1 4652.5", "h 1 1 46x2.5");
        match parse_igrf_table(&bad) {
            Err(Error::Igrf { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
        let short = SMALL.replace("g 1 1 -1450.9 -1450.9 7.4", "g 1 1 -1450.9 7.4");
        assert!(matches!(parse_igrf_table(&short), Err(Error::Igrf { line: 5, .. })));
        assert!(matches!(parse_igrf_table("g 1 0 1 2 3"), Err(Error::Igrf { line: 1, .. })));
    }

    #[test]
    fn bundled_table_has_degree_thirteen_and_2020_epoch() {
        let t = bundled_igrf_table();
        assert_eq!(*t.epochs.last().unwrap(), 2020.0);
        let c = t.at(2020.0).unwrap();
        assert_eq!(c.max_degree, 13);
        // Published IGRF-13 2020.0 values, nT.
        assert_eq!(c.g(1, 0), -29404.8);
        assert_eq!(c.g(1, 1), -1450.9);
        assert_eq!(c.h(1, 1), 4652.5);
    }
}
