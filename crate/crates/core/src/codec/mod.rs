//! Random linear coding over GF(2) and GF(2^8).
//!
//! A [`Page`] of `k` equal-length packets is encoded into [`Codeword`]s, each
//! carrying its coefficient vector in the header. [`DecoderState`] keeps the
//! received codewords in row-echelon form as they arrive (forward elimination
//! only), which is enough to drop dependent codewords and to recode. Full
//! back-substitution is deferred to [`DecoderState::decode`].

mod bitvec;
mod decoder;
mod degree;

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::galois::{Field, FieldSpec};

pub use bitvec::BitVector;
pub use decoder::{expected_overhead_trial, Absorb, DecoderState, Row, RowOps};
pub use degree::{robust_soliton, sample_degree, DegreeDistribution, DegreeSampler};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("a page needs at least one packet")]
    EmptyPage,
    #[error("packet {index} has {found} bytes, expected {expected}")]
    PacketLength {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("coefficient vector has {found} entries, expected {expected}")]
    CoefficientCount { expected: usize, found: usize },
    #[error("payload has {found} bytes, expected {expected}")]
    PayloadLength { expected: usize, found: usize },
    #[error("codeword belongs to page {found}, decoder holds page {expected}")]
    PageMismatch { expected: u32, found: u32 },
    #[error("codeword coefficients are not over {expected}")]
    FieldMismatch { expected: FieldSpec },
    #[error("insufficient rank: have {rank} of {k}")]
    InsufficientRank { rank: usize, k: usize },
    #[error("nothing to recode: decoder holds no codewords")]
    NothingToRecode,
    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),
}

/// One segment of a program image, split into `k` packets of `packet_len` bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Page {
    page_id: u32,
    packet_len: usize,
    packets: Vec<Vec<u8>>,
}

impl Page {
    pub fn new(page_id: u32, packets: Vec<Vec<u8>>) -> Result<Self, CodecError> {
        let first = packets.first().ok_or(CodecError::EmptyPage)?;
        let packet_len = first.len();
        for (index, p) in packets.iter().enumerate() {
            if p.len() != packet_len {
                return Err(CodecError::PacketLength {
                    index,
                    expected: packet_len,
                    found: p.len(),
                });
            }
        }
        Ok(Page {
            page_id,
            packet_len,
            packets,
        })
    }

    /// Splits `data` into packets of `packet_len` bytes, zero-padding the last.
    pub fn from_bytes(page_id: u32, data: &[u8], packet_len: usize) -> Result<Self, CodecError> {
        if data.is_empty() || packet_len == 0 {
            return Err(CodecError::EmptyPage);
        }
        let packets = data
            .chunks(packet_len)
            .map(|chunk| {
                let mut p = chunk.to_vec();
                p.resize(packet_len, 0);
                p
            })
            .collect();
        Self::new(page_id, packets)
    }

    pub fn random<R: Rng + ?Sized>(page_id: u32, k: usize, packet_len: usize, rng: &mut R) -> Self {
        assert!(k >= 1, "a page needs at least one packet");
        let packets = (0..k)
            .map(|_| (0..packet_len).map(|_| rng.gen()).collect())
            .collect();
        Page {
            page_id,
            packet_len,
            packets,
        }
    }

    pub fn page_id(&self) -> u32 {
        self.page_id
    }

    pub fn k(&self) -> usize {
        self.packets.len()
    }

    pub fn packet_len(&self) -> usize {
        self.packet_len
    }

    pub fn packets(&self) -> &[Vec<u8>] {
        &self.packets
    }

    pub fn packet(&self, index: usize) -> &[u8] {
        &self.packets[index]
    }
}

/// Segments a program image into consecutive pages of `k` packets each.
pub fn segment_image(image: &[u8], k: usize, packet_len: usize) -> Result<Vec<Page>, CodecError> {
    if image.is_empty() || k == 0 || packet_len == 0 {
        return Err(CodecError::EmptyPage);
    }
    let page_bytes = k * packet_len;
    image
        .chunks(page_bytes)
        .enumerate()
        .map(|(i, chunk)| {
            let mut buf = chunk.to_vec();
            buf.resize(page_bytes, 0);
            Page::from_bytes(i as u32, &buf, packet_len)
        })
        .collect()
}

/// Coefficient vector G_j, bit-packed for GF(2) and byte-per-entry for GF(2^8).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CoefficientVector {
    Binary(BitVector),
    Byte(Vec<u8>),
}

impl CoefficientVector {
    pub fn zeros(field: FieldSpec, k: usize) -> Self {
        if field.is_binary() {
            CoefficientVector::Binary(BitVector::zeros(k))
        } else {
            CoefficientVector::Byte(vec![0; k])
        }
    }

    pub fn unit(field: FieldSpec, k: usize, index: usize) -> Self {
        let mut v = Self::zeros(field, k);
        v.set(index, 1);
        v
    }

    /// Builds a vector from raw values; for GF(2) any nonzero value is 1.
    pub fn from_values(field: FieldSpec, values: &[u8]) -> Self {
        if field.is_binary() {
            let bits: Vec<bool> = values.iter().map(|&v| v != 0).collect();
            CoefficientVector::Binary(BitVector::from_bits(&bits))
        } else {
            CoefficientVector::Byte(values.to_vec())
        }
    }

    /// Uniform over the nonzero vectors of GF(q)^k.
    pub fn random_nonzero<R: Rng + ?Sized>(field: FieldSpec, k: usize, rng: &mut R) -> Self {
        loop {
            let v = if field.is_binary() {
                CoefficientVector::Binary(BitVector::random(k, rng))
            } else {
                CoefficientVector::Byte((0..k).map(|_| rng.gen()).collect())
            };
            if !v.is_zero() {
                return v;
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            CoefficientVector::Binary(b) => b.len(),
            CoefficientVector::Byte(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> u8 {
        match self {
            CoefficientVector::Binary(b) => b.get(i) as u8,
            CoefficientVector::Byte(v) => v[i],
        }
    }

    pub fn set(&mut self, i: usize, value: u8) {
        match self {
            CoefficientVector::Binary(b) => b.set(i, value != 0),
            CoefficientVector::Byte(v) => v[i] = value,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CoefficientVector::Binary(b) => b.is_zero(),
            CoefficientVector::Byte(v) => v.iter().all(|&x| x == 0),
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, CoefficientVector::Binary(_))
    }

    /// Number of nonzero coefficients.
    pub fn degree(&self) -> usize {
        match self {
            CoefficientVector::Binary(b) => b.count_ones(),
            CoefficientVector::Byte(v) => v.iter().filter(|&&x| x != 0).count(),
        }
    }

    pub fn values(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    pub(crate) fn matches_field(&self, field: FieldSpec) -> bool {
        self.is_binary() == field.is_binary()
    }

    /// Header size of this vector in bits: k·log2(q).
    pub fn header_bits(&self) -> u64 {
        match self {
            CoefficientVector::Binary(b) => b.len() as u64,
            CoefficientVector::Byte(v) => 8 * v.len() as u64,
        }
    }
}

impl fmt::Display for CoefficientVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientVector::Binary(b) => write!(f, "{b}"),
            CoefficientVector::Byte(v) => v.iter().try_for_each(|x| write!(f, "{x:02x}")),
        }
    }
}

/// A coded packet: coefficient header plus the combined payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codeword {
    pub page_id: u32,
    pub coefficients: CoefficientVector,
    pub payload: Vec<u8>,
}

impl Codeword {
    /// Codeword for `coefficients · S^T`.
    pub fn combine(
        page: &Page,
        coefficients: CoefficientVector,
        field: &Field,
    ) -> Result<Self, CodecError> {
        if coefficients.len() != page.k() {
            return Err(CodecError::CoefficientCount {
                expected: page.k(),
                found: coefficients.len(),
            });
        }
        if !coefficients.matches_field(field.spec()) {
            return Err(CodecError::FieldMismatch {
                expected: field.spec(),
            });
        }
        let mut payload = vec![0u8; page.packet_len()];
        match &coefficients {
            CoefficientVector::Binary(b) => {
                for i in b.iter_ones() {
                    field.mul_add_slice(&mut payload, page.packet(i), 1);
                }
            }
            CoefficientVector::Byte(v) => {
                for (i, &g) in v.iter().enumerate() {
                    field.mul_add_slice(&mut payload, page.packet(i), g);
                }
            }
        }
        Ok(Codeword {
            page_id: page.page_id(),
            coefficients,
            payload,
        })
    }

    /// Source packet `index` with a unit coefficient vector.
    pub fn systematic(page: &Page, index: usize, field: FieldSpec) -> Self {
        Codeword {
            page_id: page.page_id(),
            coefficients: CoefficientVector::unit(field, page.k(), index),
            payload: page.packet(index).to_vec(),
        }
    }

    pub fn k(&self) -> usize {
        self.coefficients.len()
    }
}

/// Encoder bound to one field, degree distribution and page size.
#[derive(Clone, Debug)]
pub struct Encoder {
    field: Field,
    sampler: DegreeSampler,
}

impl Encoder {
    pub fn new(field: Field, dist: DegreeDistribution, k: usize) -> Result<Self, CodecError> {
        Ok(Encoder {
            sampler: DegreeSampler::new(dist, k)?,
            field,
        })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn distribution(&self) -> &DegreeDistribution {
        self.sampler.distribution()
    }

    /// Draws a coefficient vector for one codeword.
    pub fn coefficients<R: Rng + ?Sized>(&self, rng: &mut R) -> CoefficientVector {
        let spec = self.field.spec();
        let k = self.sampler.k();
        match self.sampler.distribution() {
            DegreeDistribution::UniformRlc => CoefficientVector::random_nonzero(spec, k, rng),
            DegreeDistribution::SparseLt { .. } => {
                let d = self.sampler.sample(rng);
                let mut v = CoefficientVector::zeros(spec, k);
                for i in rand::seq::index::sample(rng, k, d) {
                    v.set(i, 1);
                }
                v
            }
        }
    }

    pub fn encode<R: Rng + ?Sized>(&self, page: &Page, rng: &mut R) -> Codeword {
        assert_eq!(
            page.k(),
            self.sampler.k(),
            "encoder built for a different k"
        );
        let g = self.coefficients(rng);
        Codeword::combine(page, g, &self.field).expect("encoder dimensions match page")
    }
}

/// Encodes one codeword of `page`.
pub fn encode<R: Rng + ?Sized>(
    page: &Page,
    rng: &mut R,
    dist: &DegreeDistribution,
    field: &Field,
) -> Result<Codeword, CodecError> {
    let encoder = Encoder::new(field.clone(), dist.clone(), page.k())?;
    Ok(encoder.encode(page, rng))
}
