//! Seeded channel generation and a binary dataset container.
//!
//! One [`ChannelSet`] holds every link a scenario needs: the base-station to
//! surface matrix, per-user surface and direct links, and the two
//! surface-to-receiver vectors used by the secrecy problem. Draws are fully
//! determined by a 64-bit seed and a fixed fill order, so an instance can be
//! replayed from its `(dims, model, seed)` triple alone; the dataset file
//! format exists for archiving instances and for exchanging them with other
//! tools bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::ComplexMatrix;

/// Problem dimensions: `m` surface elements, `n` base-station antennas,
/// `k` users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

impl Dims {
    pub fn new(m: usize, n: usize, k: usize) -> Self {
        Self { m, n, k }
    }
}

/// Small-scale fading model for every link in a set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelModel {
    /// Independent complex Gaussian entries of unit variance.
    Rayleigh,
    /// Rayleigh scatter blended with a deterministic unit-modulus
    /// line-of-sight component of weight `sqrt(k_factor / (1 + k_factor))`.
    /// `k_factor = 0` reproduces the Rayleigh draw exactly.
    Rician { k_factor: f64 },
}

/// 64-bit seed for channel draws and solver randomization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Seed for one Monte Carlo trial: the base seed xor the trial index.
    pub fn for_trial(self, trial: u64) -> RngSeed {
        RngSeed(self.0 ^ trial)
    }
}

/// Errors from channel assembly and dataset files.
#[derive(Debug, thiserror::Error)]
pub enum ChannelError {
    #[error("user index {k} out of range for {users} users")]
    UserOutOfRange { k: usize, users: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed dataset at byte {offset}: {what}")]
    Parse { offset: usize, what: String },
}

/// Every link of one scenario instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    dims: Dims,
    model: ChannelModel,
    seed: RngSeed,
    /// Base station to surface, `m x n`.
    h_bs: ComplexMatrix,
    /// Surface to user `k`, length `m` each.
    h_ris_user: Vec<Vec<Complex64>>,
    /// Base station to user `k` directly, length `n` each.
    h_direct: Vec<Vec<Complex64>>,
    /// Surface to the legitimate receiver, length `m`.
    h_legit: Vec<Complex64>,
    /// Surface to the eavesdropper, length `m`.
    h_eaves: Vec<Complex64>,
    noise_power: f64,
}

fn draw_cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn draw_entry(rng: &mut ChaCha8Rng, model: &ChannelModel) -> Complex64 {
    let scatter = draw_cn(rng);
    match model {
        ChannelModel::Rayleigh => scatter,
        ChannelModel::Rician { k_factor } => {
            let los_w = (k_factor / (1.0 + k_factor)).sqrt();
            let scatter_w = (1.0 / (1.0 + k_factor)).sqrt();
            Complex64::new(los_w, 0.0) + scatter_w * scatter
        }
    }
}

fn draw_vec(rng: &mut ChaCha8Rng, model: &ChannelModel, len: usize) -> Vec<Complex64> {
    (0..len).map(|_| draw_entry(rng, model)).collect()
}

/// Draws a full channel set. The fill order is fixed (base-station matrix
/// row-major, then per-user surface links, per-user direct links, legitimate
/// receiver, eavesdropper), so equal seeds give bitwise equal sets.
pub fn sample_channels(dims: Dims, model: ChannelModel, seed: RngSeed) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
    let h_bs = ComplexMatrix::from_fn(dims.m, dims.n, |_, _| draw_entry(&mut rng, &model));
    let h_ris_user = (0..dims.k).map(|_| draw_vec(&mut rng, &model, dims.m)).collect();
    let h_direct = (0..dims.k).map(|_| draw_vec(&mut rng, &model, dims.n)).collect();
    let h_legit = draw_vec(&mut rng, &model, dims.m);
    let h_eaves = draw_vec(&mut rng, &model, dims.m);
    ChannelSet {
        dims,
        model,
        seed,
        h_bs,
        h_ris_user,
        h_direct,
        h_legit,
        h_eaves,
        noise_power: 1.0,
    }
}

impl ChannelSet {
    /// Assembles a set from explicit links, validating dimensions.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        h_bs: ComplexMatrix,
        h_ris_user: Vec<Vec<Complex64>>,
        h_direct: Vec<Vec<Complex64>>,
        h_legit: Vec<Complex64>,
        h_eaves: Vec<Complex64>,
        noise_power: f64,
    ) -> Result<Self, ChannelError> {
        let dims = Dims::new(h_bs.rows(), h_bs.cols(), h_ris_user.len());
        if h_direct.len() != dims.k {
            return Err(ChannelError::DimensionMismatch {
                expected: dims.k,
                actual: h_direct.len(),
            });
        }
        for v in &h_ris_user {
            if v.len() != dims.m {
                return Err(ChannelError::DimensionMismatch {
                    expected: dims.m,
                    actual: v.len(),
                });
            }
        }
        for v in &h_direct {
            if v.len() != dims.n {
                return Err(ChannelError::DimensionMismatch {
                    expected: dims.n,
                    actual: v.len(),
                });
            }
        }
        if h_legit.len() != dims.m || h_eaves.len() != dims.m {
            return Err(ChannelError::DimensionMismatch {
                expected: dims.m,
                actual: h_legit.len().min(h_eaves.len()),
            });
        }
        Ok(Self {
            dims,
            model: ChannelModel::Rayleigh,
            seed: RngSeed(0),
            h_bs,
            h_ris_user,
            h_direct,
            h_legit,
            h_eaves,
            noise_power,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn model(&self) -> ChannelModel {
        self.model
    }

    pub fn seed(&self) -> RngSeed {
        self.seed
    }

    /// Base station to surface matrix, `m x n`.
    pub fn h_bs(&self) -> &ComplexMatrix {
        &self.h_bs
    }

    pub fn h_ris_user(&self, k: usize) -> &[Complex64] {
        &self.h_ris_user[k]
    }

    pub fn h_direct(&self, k: usize) -> &[Complex64] {
        &self.h_direct[k]
    }

    pub fn h_legit(&self) -> &[Complex64] {
        &self.h_legit
    }

    pub fn h_eaves(&self) -> &[Complex64] {
        &self.h_eaves
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn with_noise_power(mut self, noise_power: f64) -> Self {
        self.noise_power = noise_power;
        self
    }

    /// Adjoint of user `k`'s end-to-end channel under surface coefficients
    /// `e`: entry `n` is the conjugate of
    /// `sum_m conj(h_ris[m]) e_m H[m][n] + conj(h_direct[n])`.
    pub fn effective_channel(
        &self,
        e: &[Complex64],
        k: usize,
    ) -> Result<Vec<Complex64>, ChannelError> {
        if k >= self.dims.k {
            return Err(ChannelError::UserOutOfRange {
                k,
                users: self.dims.k,
            });
        }
        if e.len() != self.dims.m {
            return Err(ChannelError::DimensionMismatch {
                expected: self.dims.m,
                actual: e.len(),
            });
        }
        let hr = &self.h_ris_user[k];
        let hd = &self.h_direct[k];
        let mut out = hd.clone();
        for m in 0..self.dims.m {
            let w = hr[m] * e[m].conj();
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            let row = self.h_bs.row(m);
            for (o, hmn) in out.iter_mut().zip(row.iter()) {
                *o += w * hmn.conj();
            }
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    version: u32,
    m: usize,
    n: usize,
    k: usize,
    model: ChannelModel,
    seed: RngSeed,
    noise_power: f64,
}

const DATASET_MAGIC: &[u8; 4] = b"RISC";
const DATASET_VERSION: u32 = 1;

fn payload_floats(dims: Dims) -> usize {
    2 * (dims.m * dims.n + dims.k * dims.m + dims.k * dims.n + 2 * dims.m)
}

fn push_complex(buf: &mut Vec<u8>, z: &Complex64) {
    buf.extend_from_slice(&z.re.to_le_bytes());
    buf.extend_from_slice(&z.im.to_le_bytes());
}

/// Serializes a channel set: a 4-byte magic, a length-prefixed JSON header,
/// then every link as little-endian `(re, im)` float pairs in the fill order
/// of [`sample_channels`].
pub fn write_dataset(cs: &ChannelSet, path: &Path) -> Result<(), ChannelError> {
    let header = DatasetHeader {
        version: DATASET_VERSION,
        m: cs.dims.m,
        n: cs.dims.n,
        k: cs.dims.k,
        model: cs.model,
        seed: cs.seed,
        noise_power: cs.noise_power,
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serialization cannot fail");
    let mut buf = Vec::with_capacity(16 + header_bytes.len() + 16 * payload_floats(cs.dims));
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_bytes);
    for z in cs.h_bs.data() {
        push_complex(&mut buf, z);
    }
    for v in &cs.h_ris_user {
        for z in v {
            push_complex(&mut buf, z);
        }
    }
    for v in &cs.h_direct {
        for z in v {
            push_complex(&mut buf, z);
        }
    }
    for z in &cs.h_legit {
        push_complex(&mut buf, z);
    }
    for z in &cs.h_eaves {
        push_complex(&mut buf, z);
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`]. Round trips are bit exact.
pub fn read_dataset(path: &Path) -> Result<ChannelSet, ChannelError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_dataset(&bytes)
}

fn parse_dataset(bytes: &[u8]) -> Result<ChannelSet, ChannelError> {
    if bytes.len() < 4 || &bytes[0..4] != DATASET_MAGIC {
        return Err(ChannelError::Parse {
            offset: 0,
            what: "missing dataset magic".into(),
        });
    }
    if bytes.len() < 8 {
        return Err(ChannelError::Parse {
            offset: 4,
            what: "truncated header length".into(),
        });
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let header_end = 8 + header_len;
    if bytes.len() < header_end {
        return Err(ChannelError::Parse {
            offset: 8,
            what: format!("header claims {header_len} bytes, file too short"),
        });
    }
    let header: DatasetHeader =
        serde_json::from_slice(&bytes[8..header_end]).map_err(|e| ChannelError::Parse {
            offset: 8,
            what: format!("invalid JSON header: {e}"),
        })?;
    if header.version != DATASET_VERSION {
        return Err(ChannelError::Parse {
            offset: 8,
            what: format!("unsupported dataset version {}", header.version),
        });
    }
    let dims = Dims::new(header.m, header.n, header.k);
    let need = payload_floats(dims) * 8;
    let have = bytes.len() - header_end;
    if have != need {
        return Err(ChannelError::Parse {
            offset: header_end,
            what: format!("payload holds {have} bytes, dimensions require {need}"),
        });
    }

    let mut cursor = header_end;
    let mut next = |count: usize| -> Result<Vec<Complex64>, ChannelError> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let re = f64::from_le_bytes(bytes[cursor..cursor + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[cursor + 8..cursor + 16].try_into().unwrap());
            if !re.is_finite() || !im.is_finite() {
                return Err(ChannelError::Parse {
                    offset: cursor,
                    what: "non-finite channel entry".into(),
                });
            }
            out.push(Complex64::new(re, im));
            cursor += 16;
        }
        Ok(out)
    };

    let h_bs = ComplexMatrix::from_vec(dims.m, dims.n, next(dims.m * dims.n)?)
        .expect("length checked above");
    let mut h_ris_user = Vec::with_capacity(dims.k);
    for _ in 0..dims.k {
        h_ris_user.push(next(dims.m)?);
    }
    let mut h_direct = Vec::with_capacity(dims.k);
    for _ in 0..dims.k {
        h_direct.push(next(dims.n)?);
    }
    let h_legit = next(dims.m)?;
    let h_eaves = next(dims.m)?;

    Ok(ChannelSet {
        dims,
        model: header.model,
        seed: header.seed,
        h_bs,
        h_ris_user,
        h_direct,
        h_legit,
        h_eaves,
        noise_power: header.noise_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn equal_seeds_reproduce_draws_bitwise() {
        let dims = Dims::new(4, 3, 2);
        let a = sample_channels(dims, ChannelModel::Rayleigh, RngSeed(99));
        let b = sample_channels(dims, ChannelModel::Rayleigh, RngSeed(99));
        assert_eq!(a, b);
        let c = sample_channels(dims, ChannelModel::Rayleigh, RngSeed(100));
        assert_ne!(a, c);
    }

    #[test]
    fn zero_k_factor_rician_equals_rayleigh_entrywise() {
        let dims = Dims::new(5, 4, 3);
        let ray = sample_channels(dims, ChannelModel::Rayleigh, RngSeed(7));
        let ric = sample_channels(dims, ChannelModel::Rician { k_factor: 0.0 }, RngSeed(7));
        assert_eq!(ray.h_bs().data(), ric.h_bs().data());
        assert_eq!(ray.h_legit(), ric.h_legit());
        assert_eq!(ray.h_eaves(), ric.h_eaves());
        for k in 0..dims.k {
            assert_eq!(ray.h_ris_user(k), ric.h_ris_user(k));
            assert_eq!(ray.h_direct(k), ric.h_direct(k));
        }
    }

    #[test]
    fn large_k_factor_concentrates_on_the_line_of_sight() {
        let dims = Dims::new(64, 1, 1);
        let cs = sample_channels(dims, ChannelModel::Rician { k_factor: 1e8 }, RngSeed(3));
        for z in cs.h_legit() {
            assert!((z - c(1.0, 0.0)).norm() < 1e-2);
        }
    }

    #[test]
    fn effective_channel_reduces_to_direct_path_for_zero_coefficients() {
        let dims = Dims::new(4, 3, 2);
        let cs = sample_channels(dims, ChannelModel::Rayleigh, RngSeed(21));
        let e = vec![c(0.0, 0.0); dims.m];
        let v = cs.effective_channel(&e, 1).unwrap();
        assert_eq!(v, cs.h_direct(1));
    }

    #[test]
    fn effective_channel_matches_hand_computed_sum() {
        // Single element, single antenna, single user: the channel collapses
        // to h_r * conj(e) * conj(H) + h_d.
        let h_bs = ComplexMatrix::from_vec(1, 1, vec![c(0.0, 2.0)]).unwrap();
        let cs = ChannelSet::from_parts(
            h_bs,
            vec![vec![c(1.0, 1.0)]],
            vec![vec![c(0.5, 0.0)]],
            vec![c(0.0, 0.0)],
            vec![c(0.0, 0.0)],
            1.0,
        )
        .unwrap();
        let e = vec![c(0.0, 1.0)];
        let v = cs.effective_channel(&e, 0).unwrap();
        let expect = c(1.0, 1.0) * c(0.0, -1.0) * c(0.0, -2.0) + c(0.5, 0.0);
        assert!((v[0] - expect).norm() < 1e-15);
    }

    #[test]
    fn effective_channel_rejects_bad_user_and_bad_length() {
        let dims = Dims::new(2, 2, 1);
        let cs = sample_channels(dims, ChannelModel::Rayleigh, RngSeed(1));
        let e = vec![c(1.0, 0.0); 2];
        assert!(matches!(
            cs.effective_channel(&e, 1),
            Err(ChannelError::UserOutOfRange { k: 1, users: 1 })
        ));
        assert!(matches!(
            cs.effective_channel(&e[..1], 0),
            Err(ChannelError::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let dims = Dims::new(3, 2, 2);
        let cs = sample_channels(dims, ChannelModel::Rician { k_factor: 2.5 }, RngSeed(17))
            .with_noise_power(0.25);
        let dir = std::env::temp_dir().join("risopt_dataset_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("set.risc");
        write_dataset(&cs, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(cs, back);
    }

    #[test]
    fn hand_written_minimal_dataset_parses() {
        // One element, one antenna, one user, all entries enumerated by hand.
        let header = br#"{"version":1,"m":1,"n":1,"k":1,"model":{"kind":"rayleigh"},"seed":5,"noise_power":1.0}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RISC");
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header);
        for v in [
            1.0, -1.0, // base station -> surface
            0.5, 0.25, // surface -> user
            2.0, 0.0, // direct
            0.0, 3.0, // legitimate
            -2.0, 0.125, // eavesdropper
        ] {
            bytes.extend_from_slice(&f64::to_le_bytes(v));
        }
        let cs = parse_dataset(&bytes).unwrap();
        assert_eq!(cs.h_bs().get(0, 0), c(1.0, -1.0));
        assert_eq!(cs.h_ris_user(0)[0], c(0.5, 0.25));
        assert_eq!(cs.h_direct(0)[0], c(2.0, 0.0));
        assert_eq!(cs.h_legit()[0], c(0.0, 3.0));
        assert_eq!(cs.h_eaves()[0], c(-2.0, 0.125));
        assert_eq!(cs.seed(), RngSeed(5));
    }

    #[test]
    fn malformed_datasets_report_byte_offsets() {
        let err = parse_dataset(b"NOPE").unwrap_err();
        assert!(matches!(err, ChannelError::Parse { offset: 0, .. }));

        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RISC");
        bytes.extend_from_slice(&1000u32.to_le_bytes());
        let err = parse_dataset(&bytes).unwrap_err();
        assert!(matches!(err, ChannelError::Parse { offset: 8, .. }));

        let header = br#"{"version":1,"m":1,"n":1,"k":0,"model":{"kind":"rayleigh"},"seed":0,"noise_power":1.0}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RISC");
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header);
        bytes.extend_from_slice(&[0u8; 8]);
        let err = parse_dataset(&bytes).unwrap_err();
        match err {
            ChannelError::Parse { offset, what } => {
                assert_eq!(offset, 8 + header.len());
                assert!(what.contains("payload"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn trial_seeds_are_xor_derived() {
        assert_eq!(RngSeed(0b1100).for_trial(0b0110), RngSeed(0b1010));
        assert_eq!(RngSeed(42).for_trial(0), RngSeed(42));
    }
}
