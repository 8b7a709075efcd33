//! Registry of reconstruction algorithms addressable by name.

use crate::align::{center_star_msa, ground_truth_alignment, majority_vote, GapMode};
use crate::baselines::{bma, bmala, vs, VsParams, BMALA_WINDOW};
use crate::channel::{ChannelParams, Cluster, ErrorRates};
use crate::error::{Error, Result};
use crate::seq::DnaSequence;
use crate::trellis::{trellis_bma, FusionParams, TrellisConfig};

/// An estimate plus an optional note (e.g. traces that could not be used).
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub estimate: DnaSequence,
    pub warning: Option<String>,
}

impl Reconstruction {
    pub fn new(estimate: DnaSequence) -> Self {
        Reconstruction {
            estimate,
            warning: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Algorithm {
    Bma,
    Bmala { window: usize },
    Vs,
    TrellisBma(TrellisConfig),
    /// Center-star alignment of the traces, then column majority.
    MsaMajority(GapMode),
    /// Alignment recovered from the simulator's edit scripts, then column majority.
    OracleMsaMajority(GapMode),
}

impl Algorithm {
    pub const NAMES: [&'static str; 6] = [
        "bma",
        "bmala",
        "vs",
        "trellis-bma",
        "msa-majority",
        "oracle-msa-majority",
    ];

    /// Looks up a name with default settings.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "bma" => Algorithm::Bma,
            "bmala" => Algorithm::Bmala {
                window: BMALA_WINDOW,
            },
            "vs" => Algorithm::Vs,
            "trellis-bma" => Algorithm::TrellisBma(TrellisConfig::default()),
            "msa-majority" => Algorithm::MsaMajority(GapMode::default()),
            "oracle-msa-majority" => Algorithm::OracleMsaMajority(GapMode::default()),
            _ => {
                return Err(Error::UnknownAlgorithm {
                    name: name.to_string(),
                    available: Self::NAMES.to_vec(),
                })
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Bma => "bma",
            Algorithm::Bmala { .. } => "bmala",
            Algorithm::Vs => "vs",
            Algorithm::TrellisBma(_) => "trellis-bma",
            Algorithm::MsaMajority(_) => "msa-majority",
            Algorithm::OracleMsaMajority(_) => "oracle-msa-majority",
        }
    }

    /// Reconstructs a length-`length` estimate. `hint` carries the channel rates the
    /// decoder assumes (VS reads `p_S` from it, TrellisBMA all three).
    pub fn reconstruct(
        &self,
        cluster: &Cluster,
        length: usize,
        hint: &ErrorRates,
    ) -> Result<Reconstruction> {
        if length == 0 {
            return Err(Error::EmptySequence);
        }
        let traces = &cluster.traces;
        if traces.is_empty() {
            return Err(Error::EmptyTraceSet);
        }
        Ok(match self {
            Algorithm::Bma => bma(traces, length),
            Algorithm::Bmala { window } => {
                if *window == 0 {
                    return Err(Error::InvalidConfig("BMALA window must be at least 1".into()));
                }
                bmala(traces, length, *window)
            }
            Algorithm::Vs => {
                let params = VsParams::from_substitution(hint.substitution);
                vs(traces, length, &params)
            }
            Algorithm::TrellisBma(cfg) => {
                let params = ChannelParams::new(*hint)?;
                let fusion = FusionParams::for_cluster_size(traces.len());
                trellis_bma(traces, length, &params, &fusion, cfg)?
            }
            Algorithm::MsaMajority(gaps) => {
                Reconstruction::new(majority_vote(&center_star_msa(traces), length, *gaps))
            }
            Algorithm::OracleMsaMajority(gaps) => {
                let alignment = ground_truth_alignment(cluster)?;
                Reconstruction::new(majority_vote(&alignment, length, *gaps))
            }
        })
    }
}
