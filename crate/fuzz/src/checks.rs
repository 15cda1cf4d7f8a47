//! One check per input format. Each must return without panicking for any
//! byte string; formats with a writer must also reproduce themselves after a
//! write and re-read.

use sociospatial::coredata::{
    AgeStratifiedCounts, ElectionTable, Geography, PanelDataset, PanelSchema, PolicyTable, RegionId, SocialNetwork,
    StandardPopulation,
};
use sociospatial::exposure::{parse_series, write_series};
use sociospatial::geo::DistanceMatrix;
use sociospatial::regress::{FitResult, ModelSpec};
use sociospatial::synthlab::DgpConfig;

macro_rules! round_trip {
    ($ty:ty, $data:expr) => {{
        if let Ok(first) = <$ty>::parse($data, b',') {
            let mut buf = Vec::new();
            first.write(&mut buf, b',').expect("write to memory");
            let second = <$ty>::parse(buf.as_slice(), b',').expect("re-read written output");
            assert_eq!(first, second);
        }
    }};
}

pub fn panel(data: &[u8]) {
    let _ = PanelDataset::parse(data, &PanelSchema::default());
    let strict = PanelSchema { strict: true, ..PanelSchema::default() };
    let _ = PanelDataset::parse(data, &strict);
}

pub fn sci(data: &[u8]) {
    round_trip!(SocialNetwork, data);
}

pub fn geography(data: &[u8]) {
    round_trip!(Geography, data);
}

pub fn elections(data: &[u8]) {
    round_trip!(ElectionTable, data);
}

pub fn age_counts(data: &[u8]) {
    round_trip!(AgeStratifiedCounts, data);
}

pub fn standard_population(data: &[u8]) {
    round_trip!(StandardPopulation, data);
}

pub fn distance_cache(data: &[u8]) {
    round_trip!(DistanceMatrix, data);
}

pub fn policy(data: &[u8]) {
    let _ = PolicyTable::parse(data, b',');
}

pub fn exposure_series(data: &[u8]) {
    if let Ok(first) = parse_series(data, b',') {
        let refs: Vec<_> = first.iter().collect();
        let mut buf = Vec::new();
        write_series(&mut buf, &refs, b',').expect("write to memory");
        let second = parse_series(buf.as_slice(), b',').expect("re-read written output");
        assert_eq!(first, second);
    }
}

pub fn region_id(data: &[u8]) {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(id) = RegionId::parse(text) {
            assert_eq!(RegionId::parse(&id.to_string()).ok(), Some(id));
        }
    }
}

pub fn dgp_config(data: &[u8]) {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = DgpConfig::from_toml(text) {
            assert_eq!(DgpConfig::from_toml(&cfg.to_toml()).ok(), Some(cfg));
        }
    }
}

pub fn model_spec(data: &[u8]) {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = toml::from_str::<ModelSpec>(text) {
            let _ = spec.validate();
        }
    }
}

pub fn fit_result(data: &[u8]) {
    if let Ok(fit) = serde_json::from_slice::<FitResult>(data) {
        let text = serde_json::to_string(&fit).expect("serialize");
        let _ = serde_json::from_str::<FitResult>(&text).expect("re-read serialized fit");
    }
}
