//! `state,county,population` files, grouped into one histogram per state.

use std::path::Path;

use lattice_dp::Histogram;

use crate::error::{file_error, CliError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountyRecord {
    pub state: String,
    pub county: String,
    pub population: i64,
}

/// Counties of one state in file order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateHistogram {
    pub state: String,
    pub counties: Vec<String>,
    pub histogram: Histogram,
}

/// Groups counties by state. States appear in order of first occurrence and
/// counties keep their file order within a state.
pub fn load_county_csv(path: &Path) -> Result<Vec<StateHistogram>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    parse_county_csv(&text, path)
}

pub fn parse_county_csv(text: &str, path: &Path) -> Result<Vec<StateHistogram>, CliError> {
    let parse_err = |line: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(parse_err(1, e.to_string())),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        eprintln!("warning: {} is empty", path.display());
        return Ok(Vec::new());
    }
    if headers.iter().collect::<Vec<_>>() != ["state", "county", "population"] {
        return Err(parse_err(1, "expected header state,county,population".into()));
    }

    let mut states: Vec<(String, Vec<String>, Vec<i64>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", rec.len())));
        }
        let population: i64 = rec[2]
            .parse()
            .map_err(|_| parse_err(line, format!("population {:?} is not an integer", &rec[2])))?;
        if population < 0 {
            return Err(CliError::NegativePopulation {
                path: path.to_path_buf(),
                line,
                county: rec[1].to_string(),
                value: population,
            });
        }
        let state = rec[0].to_string();
        match states.iter_mut().find(|(s, _, _)| *s == state) {
            Some((_, counties, pops)) => {
                counties.push(rec[1].to_string());
                pops.push(population);
            }
            None => states.push((state, vec![rec[1].to_string()], vec![population])),
        }
    }
    if states.is_empty() {
        eprintln!("warning: {} has no county rows", path.display());
    }
    Ok(states
        .into_iter()
        .map(|(state, counties, pops)| StateHistogram {
            state,
            counties,
            histogram: Histogram::new(pops).expect("populations checked non-negative"),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<StateHistogram>, CliError> {
        parse_county_csv(text, Path::new("test.csv"))
    }

    #[test]
    fn groups_by_state_in_file_order() {
        let s = parse("state,county,population\nB,b1,5\nA,a1,1\nB,b2,6\nA,a2,2\nA,a3,3\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].state, "B");
        assert_eq!(s[0].histogram.values(), &[5, 6]);
        assert_eq!(s[1].counties, vec!["a1", "a2", "a3"]);
        assert_eq!(s[1].histogram.len(), 3);
    }

    #[test]
    fn empty_file() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("state,county,population\n").unwrap().is_empty());
    }

    #[test]
    fn non_integer_population() {
        let err = parse("state,county,population\nA,a1,1\nA,a2,1.5\n").unwrap_err();
        match err {
            CliError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_population() {
        let err = parse("state,county,population\nA,a1,-4\n").unwrap_err();
        assert!(matches!(err, CliError::NegativePopulation { value: -4, .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_header() {
        assert!(parse("a,b,c\n1,2,3\n").is_err());
    }
}
