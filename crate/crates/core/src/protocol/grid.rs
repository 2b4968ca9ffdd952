use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::data::SplitSpec;

/// Look-back scan for one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dataset_name: String,
    pub period: usize,
    pub lookbacks: Vec<usize>,
    pub horizons: Vec<usize>,
    pub n_seeds: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: String| Err(ProtocolError::InvalidInput(m));
        if self.lookbacks.is_empty() || self.horizons.is_empty() || self.n_seeds == 0 {
            return bad("grid needs at least one lookback, horizon and seed".into());
        }
        if self.lookbacks.contains(&0) || self.horizons.contains(&0) {
            return bad("lookbacks and horizons must be positive".into());
        }
        if self.lookbacks.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("lookbacks {:?} are not strictly increasing", self.lookbacks));
        }
        Ok(())
    }
}

struct Builtin {
    name: &'static str,
    period: usize,
    lookbacks: &'static [usize],
    horizons: &'static [usize],
    ett_split: bool,
}

const LONG_HORIZONS: &[usize] = &[96, 192, 336, 720];
const HOURLY: &[usize] = &[168, 336, 672, 1344];
const TEN_MINUTE: &[usize] = &[144, 288, 576, 1008];

const BUILTINS: &[Builtin] = &[
    Builtin { name: "ETTm1", period: 96, lookbacks: &[96, 192, 384, 672, 1344], horizons: LONG_HORIZONS, ett_split: true },
    Builtin { name: "ETTm2", period: 96, lookbacks: &[96, 192, 384, 672, 1344], horizons: LONG_HORIZONS, ett_split: true },
    Builtin { name: "ETTh1", period: 168, lookbacks: HOURLY, horizons: LONG_HORIZONS, ett_split: true },
    Builtin { name: "ETTh2", period: 168, lookbacks: HOURLY, horizons: LONG_HORIZONS, ett_split: true },
    Builtin { name: "Traffic", period: 168, lookbacks: HOURLY, horizons: LONG_HORIZONS, ett_split: false },
    Builtin { name: "Electricity", period: 168, lookbacks: HOURLY, horizons: LONG_HORIZONS, ett_split: false },
    Builtin { name: "Solar", period: 144, lookbacks: TEN_MINUTE, horizons: LONG_HORIZONS, ett_split: false },
    Builtin { name: "Weather", period: 144, lookbacks: TEN_MINUTE, horizons: LONG_HORIZONS, ett_split: false },
    Builtin { name: "ILI", period: 52, lookbacks: &[52, 104, 208], horizons: &[24, 36, 48, 60], ett_split: false },
    Builtin { name: "Exchange", period: 5, lookbacks: &[5, 10, 20, 40, 80, 160, 320], horizons: LONG_HORIZONS, ett_split: false },
];

/// Names accepted by [`builtin_grid`].
pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|b| b.name).collect()
}

fn find(name: &str) -> Result<&'static Builtin, ProtocolError> {
    let key = name.trim().to_ascii_lowercase();
    let key = match key.as_str() {
        "solar energy" | "solar-energy" | "solar_energy" => "solar".to_owned(),
        "exchange rate" | "exchange-rate" | "exchange_rate" => "exchange".to_owned(),
        "ecl" => "electricity".to_owned(),
        "national_illness" => "ili".to_owned(),
        other => other.to_owned(),
    };
    BUILTINS
        .iter()
        .find(|b| b.name.to_ascii_lowercase() == key)
        .ok_or_else(|| ProtocolError::UnknownDataset {
            name: name.to_owned(),
            known: builtin_names().join(", "),
        })
}

/// The look-back grid, period and horizons of a known benchmark dataset
/// (case-insensitive), with ten seeds.
pub fn builtin_grid(dataset_name: &str) -> Result<GridSpec, ProtocolError> {
    let b = find(dataset_name)?;
    Ok(GridSpec {
        dataset_name: b.name.to_owned(),
        period: b.period,
        lookbacks: b.lookbacks.to_vec(),
        horizons: b.horizons.to_vec(),
        n_seeds: 10,
    })
}

/// Train/validation/test ratios of a known dataset: 6:2:2 for ETT, 7:1:2 otherwise.
pub fn builtin_split(dataset_name: &str) -> Result<SplitSpec, ProtocolError> {
    Ok(if find(dataset_name)?.ett_split {
        SplitSpec::ett()
    } else {
        SplitSpec::standard()
    })
}
