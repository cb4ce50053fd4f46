//! Reference channels bundled into the binary.

use crate::spec::ChannelSpec;

pub const BSC_0_05: &str = include_str!("../fixtures/bsc_0_05.json");
pub const BSC_0_1: &str = include_str!("../fixtures/bsc_0_1.json");
pub const BSC_0_11: &str = include_str!("../fixtures/bsc_0_11.json");
pub const BSC_0_2: &str = include_str!("../fixtures/bsc_0_2.json");
pub const BSC_0_25: &str = include_str!("../fixtures/bsc_0_25.json");
pub const STUCK_AT_0_2: &str = include_str!("../fixtures/stuck_at_0_2.json");
pub const STUCK_AT_0_3: &str = include_str!("../fixtures/stuck_at_0_3.json");
pub const ZERO_CAPACITY: &str = include_str!("../fixtures/zero_capacity.json");
pub const RANDOM_222: &str = include_str!("../fixtures/random_222.json");
/// Values for [`RANDOM_222`] computed outside this crate.
pub const RANDOM_222_ORACLE: &str = include_str!("../fixtures/random_222_oracle.json");
/// Length-3 repetition code for the binary symmetric channels.
pub const REPETITION_N3: &str = include_str!("../fixtures/repetition_n3.json");

pub const CHANNELS: [(&str, &str); 9] = [
    ("bsc_0_05", BSC_0_05),
    ("bsc_0_1", BSC_0_1),
    ("bsc_0_11", BSC_0_11),
    ("bsc_0_2", BSC_0_2),
    ("bsc_0_25", BSC_0_25),
    ("stuck_at_0_2", STUCK_AT_0_2),
    ("stuck_at_0_3", STUCK_AT_0_3),
    ("zero_capacity", ZERO_CAPACITY),
    ("random_222", RANDOM_222),
];

pub fn channel(text: &str) -> ChannelSpec {
    ChannelSpec::parse(text).expect("bundled fixture is valid")
}

#[derive(Clone, Copy, Debug, serde::Deserialize)]
pub struct Oracle {
    pub gp_capacity_nats: f64,
    pub receiver_csi_capacity_nats: f64,
}

pub fn random_222_oracle() -> Oracle {
    serde_json::from_str(RANDOM_222_ORACLE).expect("bundled oracle parses")
}
