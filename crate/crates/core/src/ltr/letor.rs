//! LETOR / SVMlight ranking files:
//! `<label> qid:<qid> 1:<v> 2:<v> ... #<docid>`, feature indices 1-based
//! and contiguous.

use std::fmt::Write as _;
use std::path::Path;

use super::{RankingInstance, MAX_LABEL};
use crate::error::{Error, Result};

pub fn format_instance(inst: &RankingInstance) -> String {
    let mut s = format!("{} qid:{}", inst.label, inst.query_id);
    for (i, v) in inst.features.iter().enumerate() {
        write!(s, " {}:{}", i + 1, v).unwrap();
    }
    write!(s, " #{}", inst.doc_id).unwrap();
    s
}

fn parse_line(line: &str) -> std::result::Result<RankingInstance, String> {
    let (body, doc_id) = match line.split_once('#') {
        Some((b, d)) => (b, d.trim().to_owned()),
        None => (line, String::new()),
    };
    let mut parts = body.split_whitespace();
    let label: u8 = parts
        .next()
        .ok_or("empty line")?
        .parse()
        .map_err(|_| "label is not a small non-negative integer")?;
    if label > MAX_LABEL {
        return Err(format!("label {label} outside 0..=2"));
    }
    let query_id = parts
        .next()
        .and_then(|q| q.strip_prefix("qid:"))
        .filter(|q| !q.is_empty())
        .ok_or("expected `qid:<id>`")?
        .to_owned();
    let mut features = Vec::new();
    for tok in parts {
        let (idx, val) = tok.split_once(':').ok_or_else(|| format!("bad feature `{tok}`"))?;
        let idx: usize = idx.parse().map_err(|_| format!("bad feature index `{idx}`"))?;
        if idx != features.len() + 1 {
            return Err(format!(
                "feature index {idx} out of order: expected {}",
                features.len() + 1
            ));
        }
        let val: f64 = val.parse().map_err(|_| format!("bad feature value `{val}`"))?;
        features.push(val);
    }
    Ok(RankingInstance {
        query_id,
        doc_id,
        features,
        label,
    })
}

/// Parses LETOR text; `source` names the input in error messages.
pub fn parse_letor(text: &str, source: &str) -> Result<Vec<RankingInstance>> {
    let mut out: Vec<RankingInstance> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst = parse_line(line).map_err(|m| Error::parse(source, i + 1, m))?;
        if let Some(first) = out.first() {
            if first.features.len() != inst.features.len() {
                return Err(Error::parse(
                    source,
                    i + 1,
                    format!(
                        "expected {} features, found {}",
                        first.features.len(),
                        inst.features.len()
                    ),
                ));
            }
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn read_letor(path: &Path) -> Result<Vec<RankingInstance>> {
    let text = crate::io::read_to_string(path)?;
    parse_letor(&text, &path.display().to_string())
}

pub fn write_letor(data: &[RankingInstance], path: &Path) -> Result<()> {
    for inst in data {
        if inst.query_id.is_empty() || inst.query_id.chars().any(|c| c.is_whitespace() || c == '#') {
            return Err(Error::InvalidArgument(format!("query id `{}` not writable", inst.query_id)));
        }
        if inst.doc_id.trim() != inst.doc_id || inst.doc_id.contains('\n') {
            return Err(Error::InvalidArgument(format!("doc id `{}` not writable", inst.doc_id)));
        }
    }
    let lines: Vec<String> = data.iter().map(format_instance).collect();
    crate::io::write_lines(path, &lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_grammar_example() {
        let got = parse_letor("2 qid:7 1:0.5 2:-3.1 #d42", "t").unwrap();
        assert_eq!(
            got,
            vec![RankingInstance {
                query_id: "7".into(),
                doc_id: "d42".into(),
                features: vec![0.5, -3.1],
                label: 2,
            }]
        );
    }

    #[test]
    fn missing_index_rejected_with_line() {
        let err = parse_letor("1 qid:1 1:0.1 2:0.2 #a\n0 qid:1 1:0.3 3:0.1 #b", "f.txt").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e:?}"),
        }
        assert!(parse_letor("3 qid:1 1:0 #a", "t").is_err());
        assert!(parse_letor("1 1:0 #a", "t").is_err());
    }

    fn instance() -> impl Strategy<Value = RankingInstance> {
        (
            0u8..=2,
            "[a-z0-9]{1,6}",
            "[a-z0-9_]{1,8}",
            proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 4),
        )
            .prop_map(|(label, q, d, features)| RankingInstance {
                query_id: q,
                doc_id: d,
                features,
                label,
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn round_trip(data in proptest::collection::vec(instance(), 100)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("d.letor");
            write_letor(&data, &p).unwrap();
            prop_assert_eq!(read_letor(&p).unwrap(), data);
        }
    }
}
