//! Machine description and functional-unit timing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("lanes must be a power of two >= 2, got {0}")]
    BadLanes(usize),
    #[error("port_bytes must equal lanes * word_bits / 8 = {expected}, got {got}")]
    PortWidth { expected: usize, got: usize },
    #[error("ring dimension {n} is not supported with {lanes} lanes")]
    UnsupportedN { n: usize, lanes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuKind {
    Ntt,
    Automorphism,
    Multiplier,
    Adder,
}

impl FuKind {
    pub const ALL: [FuKind; 4] = [FuKind::Ntt, FuKind::Automorphism, FuKind::Multiplier, FuKind::Adder];

    pub fn name(&self) -> &'static str {
        match self {
            FuKind::Ntt => "ntt",
            FuKind::Automorphism => "aut",
            FuKind::Multiplier => "mul",
            FuKind::Adder => "add",
        }
    }
}

/// Throughput class of the NTT and automorphism units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuModel {
    /// `E` elements per cycle.
    #[default]
    Full,
    /// One butterfly stage per pass: `log2 N` times the occupancy, with
    /// `log2 N` times as many units for equal aggregate throughput.
    LowThroughput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuCounts {
    pub ntt: usize,
    pub automorphism: usize,
    pub multiplier: usize,
    pub adder: usize,
}

impl Default for FuCounts {
    fn default() -> Self {
        Self {
            ntt: 1,
            automorphism: 1,
            multiplier: 2,
            adder: 2,
        }
    }
}

/// Pipeline depths in cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuLatencies {
    pub adder: u64,
    pub multiplier: u64,
    /// One layer of the automorphism's row/column permutation network.
    pub permute_layer: u64,
}

impl Default for FuLatencies {
    fn default() -> Self {
        Self {
            adder: 4,
            multiplier: 8,
            permute_layer: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineConfig {
    pub name: String,
    pub clusters: usize,
    pub lanes: usize,
    pub word_bits: u32,
    pub fus_per_cluster: FuCounts,
    pub fu_latencies: FuLatencies,
    pub ntt_model: FuModel,
    pub automorphism_model: FuModel,
    pub scratchpad_bytes: u64,
    pub banks: usize,
    /// Vector-chunk accesses per bank per cycle.
    pub bank_ports: usize,
    /// Chunk transfers per cycle per cluster, each direction.
    pub xbar_ports_per_cluster: usize,
    pub rf_vectors_per_cluster: usize,
    pub rf_read_ports: usize,
    pub rf_write_ports: usize,
    pub hbm_bytes_per_cycle: u64,
    pub port_bytes: usize,
    pub mem_worst_case_latency: u64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            clusters: 16,
            lanes: 128,
            word_bits: 32,
            fus_per_cluster: FuCounts::default(),
            fu_latencies: FuLatencies::default(),
            ntt_model: FuModel::Full,
            automorphism_model: FuModel::Full,
            scratchpad_bytes: 64 << 20,
            banks: 16,
            bank_ports: 2,
            xbar_ports_per_cluster: 3,
            rf_vectors_per_cluster: 64,
            rf_read_ports: 10,
            rf_write_ports: 6,
            hbm_bytes_per_cycle: 1024,
            port_bytes: 512,
            mem_worst_case_latency: 200,
        }
    }
}

impl MachineConfig {
    /// Small machine for desk-scale runs: `lanes` lanes, 4 clusters and a
    /// scratchpad of `scratch_vectors` residue vectors of length `n`.
    pub fn desk(n: usize, lanes: usize, scratch_vectors: usize) -> Self {
        let word_bytes = 4;
        let port_bytes = lanes * word_bytes;
        Self {
            name: format!("desk-n{n}-e{lanes}-s{scratch_vectors}"),
            clusters: 4,
            lanes,
            scratchpad_bytes: (scratch_vectors * n * word_bytes) as u64,
            banks: 8,
            hbm_bytes_per_cycle: 2 * port_bytes as u64,
            port_bytes,
            mem_worst_case_latency: 20,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let counts = [
            ("clusters", self.clusters),
            ("banks", self.banks),
            ("bank_ports", self.bank_ports),
            ("xbar_ports_per_cluster", self.xbar_ports_per_cluster),
            ("rf_vectors_per_cluster", self.rf_vectors_per_cluster),
            ("rf_read_ports", self.rf_read_ports),
            ("rf_write_ports", self.rf_write_ports),
            ("fus_per_cluster.ntt", self.fus_per_cluster.ntt),
            ("fus_per_cluster.automorphism", self.fus_per_cluster.automorphism),
            ("fus_per_cluster.multiplier", self.fus_per_cluster.multiplier),
            ("fus_per_cluster.adder", self.fus_per_cluster.adder),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(ConfigError::Zero(name));
            }
        }
        if self.hbm_bytes_per_cycle == 0 {
            return Err(ConfigError::Zero("hbm_bytes_per_cycle"));
        }
        if self.scratchpad_bytes == 0 {
            return Err(ConfigError::Zero("scratchpad_bytes"));
        }
        if self.lanes < 2 || !self.lanes.is_power_of_two() {
            return Err(ConfigError::BadLanes(self.lanes));
        }
        let expected = self.lanes * self.word_bits as usize / 8;
        if self.port_bytes != expected {
            return Err(ConfigError::PortWidth {
                expected,
                got: self.port_bytes,
            });
        }
        Ok(())
    }

    /// `N = G·E` with `G ≤ E`.
    pub fn check_n(&self, n: usize) -> Result<(), ConfigError> {
        if !n.is_power_of_two() || n < self.lanes || n / self.lanes > self.lanes {
            return Err(ConfigError::UnsupportedN { n, lanes: self.lanes });
        }
        Ok(())
    }

    pub fn vector_bytes(&self, n: usize) -> u64 {
        (n * self.word_bits as usize / 8) as u64
    }

    /// Scratchpad capacity in residue vectors of length `n`.
    pub fn scratch_vectors(&self, n: usize) -> usize {
        (self.scratchpad_bytes / self.vector_bytes(n)) as usize
    }

    /// Cycles the HBM channel is busy moving one vector.
    pub fn hbm_cycles(&self, n: usize) -> u64 {
        self.vector_bytes(n).div_ceil(self.hbm_bytes_per_cycle)
    }

    /// Cycles a vector occupies a crossbar or bank port.
    pub fn chunk_cycles(&self, n: usize) -> u64 {
        (n / self.lanes) as u64
    }

    fn model(&self, kind: FuKind) -> FuModel {
        match kind {
            FuKind::Ntt => self.ntt_model,
            FuKind::Automorphism => self.automorphism_model,
            _ => FuModel::Full,
        }
    }

    /// Units of `kind` per cluster for ring dimension `n`.
    pub fn fu_count(&self, kind: FuKind, n: usize) -> usize {
        let base = match kind {
            FuKind::Ntt => self.fus_per_cluster.ntt,
            FuKind::Automorphism => self.fus_per_cluster.automorphism,
            FuKind::Multiplier => self.fus_per_cluster.multiplier,
            FuKind::Adder => self.fus_per_cluster.adder,
        };
        match self.model(kind) {
            FuModel::Full => base,
            FuModel::LowThroughput => base * n.trailing_zeros() as usize,
        }
    }
}

/// `(issue_cycles, latency)` of one instruction on a `kind` unit.
///
/// A unit accepts a new vector every `issue_cycles`; the result's last
/// chunk leaves `latency + issue_cycles − 1` cycles after issue.
pub fn fu_timing(kind: FuKind, n: usize, config: &MachineConfig) -> Result<(u64, u64), ConfigError> {
    config.check_n(n)?;
    let e = config.lanes as u64;
    let log_e = config.lanes.trailing_zeros() as u64;
    let occ = (n / config.lanes) as u64;
    let lat = &config.fu_latencies;
    let transpose = 3 * e / 2;
    let permute = log_e * lat.permute_layer;
    // E-point butterfly network: log2 E multiplier-deep stages
    let stage = log_e * lat.multiplier;
    let (issue, latency) = match kind {
        FuKind::Adder => (occ, lat.adder),
        FuKind::Multiplier => (occ, lat.multiplier),
        FuKind::Automorphism => (occ, 2 * transpose + 2 * permute),
        FuKind::Ntt => (occ, 2 * stage + lat.multiplier + transpose),
    };
    let issue = match config.model(kind) {
        FuModel::Full => issue,
        FuModel::LowThroughput => issue * n.trailing_zeros() as u64,
    };
    Ok((issue, latency))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let c = MachineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.scratch_vectors(16384), 1024);
        assert_eq!(c.hbm_cycles(16384), 64);
        MachineConfig::desk(64, 8, 100).validate().unwrap();
    }

    #[test]
    fn issue_is_n_over_e() {
        let c = MachineConfig::default();
        for kind in FuKind::ALL {
            assert_eq!(fu_timing(kind, 16384, &c).unwrap().0, 128);
        }
        let (_, aut) = fu_timing(FuKind::Automorphism, 16384, &c).unwrap();
        assert_eq!(aut, 2 * 192 + 2 * 7);
        assert!(fu_timing(FuKind::Adder, 64, &c).is_err());
        assert!(fu_timing(FuKind::Adder, 32768, &c).is_err());
    }

    #[test]
    fn low_throughput_keeps_aggregate_rate() {
        let mut c = MachineConfig::default();
        c.ntt_model = FuModel::LowThroughput;
        let (issue, _) = fu_timing(FuKind::Ntt, 16384, &c).unwrap();
        assert_eq!(issue, 128 * 14);
        assert_eq!(c.fu_count(FuKind::Ntt, 16384), 14);
        // vectors per cycle per cluster unchanged
        assert_eq!(issue / c.fu_count(FuKind::Ntt, 16384) as u64, 128);
        assert_eq!(fu_timing(FuKind::Adder, 16384, &c).unwrap().0, 128);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = MachineConfig::default();
        c.port_bytes = 100;
        assert!(matches!(c.validate(), Err(ConfigError::PortWidth { .. })));
        let mut c = MachineConfig::default();
        c.banks = 0;
        assert_eq!(c.validate(), Err(ConfigError::Zero("banks")));
    }
}
