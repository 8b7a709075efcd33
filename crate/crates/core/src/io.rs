//! JSONL cluster files and plain-text estimate files.
//!
//! Cluster line:
//! `{"x": "ACGT", "traces": ["ACT", ...], "p_i": 0.05, "p_d": 0.05, "p_s": 0.05, "seed": 7}`
//! with optional `"edits"` (one compact edit script per trace) and `"profile"` (per-position
//! rates as `{"insertion", "deletion", "substitution"}` objects).
//!
//! Estimate file: one estimate per line in dataset order; an empty line is an empty
//! estimate.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, Cluster, EditScript, ErrorRates};
use crate::error::{Error, Result};
use crate::seq::DnaSequence;

#[derive(Serialize, Deserialize)]
struct ClusterRecord {
    x: String,
    traces: Vec<String>,
    p_i: f64,
    p_d: f64,
    p_s: f64,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edits: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile: Option<Vec<ErrorRates>>,
}

/// One JSON object, no trailing newline.
pub fn cluster_to_json(cluster: &Cluster) -> String {
    let record = ClusterRecord {
        x: cluster.ground_truth.to_string(),
        traces: cluster.traces.iter().map(|t| t.to_string()).collect(),
        p_i: cluster.params.rates.insertion,
        p_d: cluster.params.rates.deletion,
        p_s: cluster.params.rates.substitution,
        seed: cluster.seed,
        edits: cluster
            .edits
            .as_ref()
            .map(|e| e.iter().map(EditScript::to_compact).collect()),
        profile: cluster.params.position_profile.clone(),
    };
    serde_json::to_string(&record).expect("cluster record serializes")
}

/// Parses one line; `line_no` (1-based) is used in errors.
pub fn cluster_from_json(text: &str, line_no: usize) -> Result<Cluster> {
    let parse = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let record: ClusterRecord = serde_json::from_str(text).map_err(|e| parse(e.to_string()))?;
    let ground_truth: DnaSequence = record.x.parse().map_err(|e: Error| parse(format!("x: {e}")))?;
    let traces = record
        .traces
        .iter()
        .enumerate()
        .map(|(i, t)| t.parse().map_err(|e: Error| parse(format!("trace {i}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let rates = ErrorRates::new(record.p_i, record.p_d, record.p_s).map_err(|e| parse(e.to_string()))?;
    let mut params = ChannelParams::new(rates).map_err(|e| parse(e.to_string()))?;
    if let Some(profile) = record.profile {
        params = params.with_profile(profile).map_err(|e| parse(e.to_string()))?;
    }
    let edits = record
        .edits
        .map(|scripts| {
            scripts
                .iter()
                .map(|s| EditScript::parse_compact(s).map_err(|e| parse(e.to_string())))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    if let Some(e) = &edits {
        if e.len() != traces.len() {
            return Err(parse(format!("{} edit scripts for {} traces", e.len(), traces.len())));
        }
    }
    Ok(Cluster {
        ground_truth,
        traces,
        edits,
        params,
        seed: record.seed,
    })
}

/// Reads every non-blank line of a JSONL stream.
pub fn read_clusters<R: BufRead>(reader: R) -> Result<Vec<Cluster>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(cluster_from_json(&line, i + 1)?);
    }
    Ok(out)
}

pub fn write_clusters<W: Write>(mut writer: W, clusters: &[Cluster]) -> Result<()> {
    for c in clusters {
        writeln!(writer, "{}", cluster_to_json(c))?;
    }
    Ok(())
}

pub fn read_estimates<R: BufRead>(reader: R) -> Result<Vec<DnaSequence>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let line = line?;
            line.trim().parse().map_err(|e: Error| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_estimates<W: Write>(mut writer: W, estimates: &[DnaSequence]) -> Result<()> {
    for e in estimates {
        writeln!(writer, "{e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_indexed, ClusterSize, GenerateConfig, NoiseDistribution};
    use crate::seq::dna;

    #[test]
    fn cluster_round_trip() {
        let cfg = GenerateConfig::new(20, ClusterSize::Range(2..=5), NoiseDistribution::standard(2));
        let clusters: Vec<_> = (0..5).map(|i| generate_indexed(&cfg, 9, i).unwrap()).collect();
        let mut buf = Vec::new();
        write_clusters(&mut buf, &clusters).unwrap();
        let back = read_clusters(buf.as_slice()).unwrap();
        assert_eq!(back, clusters);
        for c in &back {
            c.check_replay().unwrap();
        }
    }

    #[test]
    fn profile_round_trip() {
        let mut c = generate_indexed(
            &GenerateConfig::new(6, ClusterSize::Fixed(2), NoiseDistribution::point(0.05)),
            1,
            0,
        )
        .unwrap();
        c.params = c
            .params
            .clone()
            .with_tail(6, 2, ErrorRates::new(0.3, 0.05, 0.05).unwrap())
            .unwrap();
        let back = cluster_from_json(&cluster_to_json(&c), 1).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn minimal_line_parses() {
        let c = cluster_from_json(
            r#"{"x":"ACTTGAT","traces":["ACTTTGAT","ATTTAT"],"p_i":0.1,"p_d":0.1,"p_s":0.1,"seed":3}"#,
            1,
        )
        .unwrap();
        assert_eq!(c.traces[1], dna("ATTTAT"));
        assert!(c.edits.is_none());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "{\"x\":\"AC\",\"traces\":[],\"p_i\":0,\"p_d\":0,\"p_s\":0,\"seed\":0}\n\n{\"x\":\"AX\"}\n";
        match read_clusters(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad = r#"{"x":"AC","traces":["AQ"],"p_i":0,"p_d":0,"p_s":0,"seed":0}"#;
        assert!(cluster_from_json(bad, 4).unwrap_err().to_string().starts_with("line 4"));
    }

    #[test]
    fn estimates_round_trip_with_blank() {
        let est = vec![dna("ACGT"), dna(""), dna("TT")];
        let mut buf = Vec::new();
        write_estimates(&mut buf, &est).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "ACGT\n\nTT\n");
        assert_eq!(read_estimates(buf.as_slice()).unwrap(), est);
        match read_estimates("AC\nAZ\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
