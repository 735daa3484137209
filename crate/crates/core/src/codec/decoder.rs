use rand::Rng;

use super::{BitVector, CodecError, Codeword, CoefficientVector, Page};
use crate::galois::{Field, FieldSpec};

/// Outcome of absorbing one codeword.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Absorb {
    Innovative,
    Redundant,
}

/// Row combinations performed, split into the coefficient part (the k³ term
/// of Gaussian elimination) and the payload part (the k²L term).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RowOps {
    pub coefficient: u64,
    pub payload: u64,
}

impl RowOps {
    pub fn total(&self) -> u64 {
        self.coefficient + self.payload
    }

    fn combine(&mut self) {
        self.coefficient += 1;
        self.payload += 1;
    }
}

/// One stored equation. The pivot coefficient is always 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub coefficients: CoefficientVector,
    pub payload: Vec<u8>,
}

/// Incremental decoder holding received codewords in row-echelon form.
///
/// `rows[c]` is the row whose leading coefficient sits in column `c`, so the
/// stored rows are always in strict echelon order.
#[derive(Clone, Debug)]
pub struct DecoderState {
    field: Field,
    page_id: u32,
    k: usize,
    packet_len: usize,
    rows: Vec<Option<Row>>,
    rank: usize,
    row_ops: RowOps,
    received: u64,
    redundant: u64,
}

impl DecoderState {
    pub fn new(field: Field, page_id: u32, k: usize, packet_len: usize) -> Self {
        DecoderState {
            field,
            page_id,
            k,
            packet_len,
            rows: vec![None; k],
            rank: 0,
            row_ops: RowOps::default(),
            received: 0,
            redundant: 0,
        }
    }

    /// A decoder already holding every packet of `page` as unit rows.
    pub fn full(field: Field, page: &Page) -> Self {
        let spec = field.spec();
        let mut d = Self::new(field, page.page_id(), page.k(), page.packet_len());
        for i in 0..page.k() {
            d.rows[i] = Some(Row {
                coefficients: CoefficientVector::unit(spec, page.k(), i),
                payload: page.packet(i).to_vec(),
            });
        }
        d.rank = page.k();
        d
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn page_id(&self) -> u32 {
        self.page_id
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn packet_len(&self) -> usize {
        self.packet_len
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_complete(&self) -> bool {
        self.rank == self.k
    }

    pub fn row_ops(&self) -> RowOps {
        self.row_ops
    }

    /// Codewords offered to `absorb`, innovative or not.
    pub fn received(&self) -> u64 {
        self.received
    }

    /// Codewords discarded as linearly dependent.
    pub fn redundant(&self) -> u64 {
        self.redundant
    }

    /// Stored rows in increasing pivot order, with their pivot column.
    pub fn rows(&self) -> impl Iterator<Item = (usize, &Row)> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(c, r)| r.as_ref().map(|r| (c, r)))
    }

    fn check(&self, cw: &Codeword) -> Result<(), CodecError> {
        if cw.page_id != self.page_id {
            return Err(CodecError::PageMismatch {
                expected: self.page_id,
                found: cw.page_id,
            });
        }
        if cw.coefficients.len() != self.k {
            return Err(CodecError::CoefficientCount {
                expected: self.k,
                found: cw.coefficients.len(),
            });
        }
        if cw.payload.len() != self.packet_len {
            return Err(CodecError::PayloadLength {
                expected: self.packet_len,
                found: cw.payload.len(),
            });
        }
        if !cw.coefficients.matches_field(self.field.spec()) {
            return Err(CodecError::FieldMismatch {
                expected: self.field.spec(),
            });
        }
        Ok(())
    }

    /// Forward-eliminates `cw` against the stored rows and keeps it if a
    /// nonzero residual remains. No back-substitution happens here.
    pub fn absorb(&mut self, cw: &Codeword) -> Result<Absorb, CodecError> {
        self.check(cw)?;
        self.received += 1;
        let mut coeffs = cw.coefficients.clone();
        let mut payload = cw.payload.clone();
        let pivot = match &mut coeffs {
            CoefficientVector::Binary(bits) => {
                reduce_binary(&self.rows, bits, &mut payload, &mut self.row_ops)
            }
            CoefficientVector::Byte(values) => reduce_bytes(
                &self.field,
                &self.rows,
                values,
                &mut payload,
                &mut self.row_ops,
            ),
        };
        match pivot {
            Some(col) => {
                if let CoefficientVector::Byte(values) = &mut coeffs {
                    let lead = values[col];
                    if lead != 1 {
                        let inv = self.field.inv_raw(lead).expect("pivot is nonzero");
                        self.field.scale_slice(&mut values[col..], inv);
                        self.field.scale_slice(&mut payload, inv);
                    }
                }
                self.rows[col] = Some(Row {
                    coefficients: coeffs,
                    payload,
                });
                self.rank += 1;
                Ok(Absorb::Innovative)
            }
            None => {
                self.redundant += 1;
                Ok(Absorb::Redundant)
            }
        }
    }

    /// Whether `coefficients` lies outside the current row space. Does not
    /// modify the decoder or its counters.
    pub fn is_innovative(&self, coefficients: &CoefficientVector) -> bool {
        let mut scratch = RowOps::default();
        let mut coeffs = coefficients.clone();
        let mut no_payload = Vec::new();
        match &mut coeffs {
            CoefficientVector::Binary(bits) => {
                reduce_binary_coeffs(&self.rows, bits, &mut no_payload, &mut scratch, false)
                    .is_some()
            }
            CoefficientVector::Byte(values) => reduce_bytes_inner(
                &self.field,
                &self.rows,
                values,
                &mut no_payload,
                &mut scratch,
                false,
            )
            .is_some(),
        }
    }

    /// Back-substitutes to reduced echelon form and returns the source page.
    pub fn decode(&mut self) -> Result<Page, CodecError> {
        if self.rank < self.k {
            return Err(CodecError::InsufficientRank {
                rank: self.rank,
                k: self.k,
            });
        }
        for col in (1..self.k).rev() {
            let (above, rest) = self.rows.split_at_mut(col);
            let pivot_row = rest[0].as_ref().expect("full rank");
            for row in above.iter_mut().flatten() {
                let factor = row.coefficients.get(col);
                if factor == 0 {
                    continue;
                }
                match (&mut row.coefficients, &pivot_row.coefficients) {
                    (CoefficientVector::Binary(a), CoefficientVector::Binary(b)) => a.xor_assign(b),
                    (CoefficientVector::Byte(a), CoefficientVector::Byte(b)) => {
                        self.field.mul_add_slice(&mut a[col..], &b[col..], factor)
                    }
                    _ => unreachable!("rows share one field"),
                }
                self.field
                    .mul_add_slice(&mut row.payload, &pivot_row.payload, factor);
                self.row_ops.combine();
            }
        }
        let packets = self
            .rows
            .iter()
            .map(|r| r.as_ref().expect("full rank").payload.clone())
            .collect();
        Page::new(self.page_id, packets)
    }

    /// Random combination of the stored rows: a codeword inside the row
    /// space of everything received so far.
    pub fn recode<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Codeword, CodecError> {
        if self.rank == 0 {
            return Err(CodecError::NothingToRecode);
        }
        let stored: Vec<&Row> = self.rows.iter().flatten().collect();
        let weights: Vec<u8> = loop {
            let w: Vec<u8> = if self.field.spec().is_binary() {
                stored.iter().map(|_| rng.gen::<bool>() as u8).collect()
            } else {
                stored.iter().map(|_| rng.gen()).collect()
            };
            if w.iter().any(|&x| x != 0) {
                break w;
            }
        };
        Ok(self.combine_rows(&stored, &weights))
    }

    fn combine_rows(&self, stored: &[&Row], weights: &[u8]) -> Codeword {
        let spec = self.field.spec();
        let mut coeffs = CoefficientVector::zeros(spec, self.k);
        let mut payload = vec![0u8; self.packet_len];
        for (row, &w) in stored.iter().zip(weights) {
            if w == 0 {
                continue;
            }
            match (&mut coeffs, &row.coefficients) {
                (CoefficientVector::Binary(a), CoefficientVector::Binary(b)) => a.xor_assign(b),
                (CoefficientVector::Byte(a), CoefficientVector::Byte(b)) => {
                    self.field.mul_add_slice(a, b, w)
                }
                _ => unreachable!("rows share one field"),
            }
            self.field.mul_add_slice(&mut payload, &row.payload, w);
        }
        Codeword {
            page_id: self.page_id,
            coefficients: coeffs,
            payload,
        }
    }

    /// Source packet `index` as a systematic codeword. Requires full rank;
    /// triggers back-substitution.
    pub fn systematic(&mut self, index: usize) -> Result<Codeword, CodecError> {
        let page = self.decode()?;
        Ok(Codeword::systematic(&page, index, self.field.spec()))
    }
}

fn reduce_binary(
    rows: &[Option<Row>],
    bits: &mut BitVector,
    payload: &mut [u8],
    ops: &mut RowOps,
) -> Option<usize> {
    reduce_binary_coeffs(rows, bits, payload, ops, true)
}

fn reduce_binary_coeffs(
    rows: &[Option<Row>],
    bits: &mut BitVector,
    payload: &mut [u8],
    ops: &mut RowOps,
    with_payload: bool,
) -> Option<usize> {
    let mut from = 0;
    while let Some(col) = bits.first_one_from(from) {
        match &rows[col] {
            Some(row) => {
                let CoefficientVector::Binary(pivot) = &row.coefficients else {
                    unreachable!("rows share one field")
                };
                bits.xor_assign(pivot);
                ops.coefficient += 1;
                if with_payload {
                    payload
                        .iter_mut()
                        .zip(&row.payload)
                        .for_each(|(a, b)| *a ^= b);
                    ops.payload += 1;
                }
                from = col + 1;
            }
            None => return Some(col),
        }
    }
    None
}

fn reduce_bytes(
    field: &Field,
    rows: &[Option<Row>],
    values: &mut [u8],
    payload: &mut [u8],
    ops: &mut RowOps,
) -> Option<usize> {
    reduce_bytes_inner(field, rows, values, payload, ops, true)
}

fn reduce_bytes_inner(
    field: &Field,
    rows: &[Option<Row>],
    values: &mut [u8],
    payload: &mut [u8],
    ops: &mut RowOps,
    with_payload: bool,
) -> Option<usize> {
    for col in 0..values.len() {
        let factor = values[col];
        if factor == 0 {
            continue;
        }
        match &rows[col] {
            Some(row) => {
                let CoefficientVector::Byte(pivot) = &row.coefficients else {
                    unreachable!("rows share one field")
                };
                field.mul_add_slice(&mut values[col..], &pivot[col..], factor);
                ops.coefficient += 1;
                if with_payload {
                    field.mul_add_slice(payload, &row.payload, factor);
                    ops.payload += 1;
                }
            }
            None => return Some(col),
        }
    }
    None
}

/// Monte Carlo estimate of δ: uniform nonzero codewords received beyond `k`
/// before the decoder reaches rank `k`.
pub fn expected_overhead_trial<R: Rng + ?Sized>(
    k: usize,
    field: FieldSpec,
    trials: usize,
    rng: &mut R,
) -> f64 {
    assert!(trials >= 1, "need at least one trial");
    let field = Field::new(field);
    let mut extra = 0u64;
    for _ in 0..trials {
        let mut dec = DecoderState::new(field.clone(), 0, k, 0);
        while !dec.is_complete() {
            let cw = Codeword {
                page_id: 0,
                coefficients: CoefficientVector::random_nonzero(field.spec(), k, rng),
                payload: Vec::new(),
            };
            dec.absorb(&cw).expect("dimensions match");
        }
        extra += dec.received() - k as u64;
    }
    extra as f64 / trials as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{DegreeDistribution, Encoder};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bin_cw(bits: &str, payload: Vec<u8>) -> Codeword {
        Codeword {
            page_id: 0,
            coefficients: CoefficientVector::Binary(BitVector::parse(bits).unwrap()),
            payload,
        }
    }

    fn assert_echelon(d: &DecoderState) {
        let mut count = 0;
        for (col, row) in d.rows() {
            count += 1;
            assert_eq!(row.coefficients.get(col), 1);
            for c in 0..col {
                assert_eq!(row.coefficients.get(c), 0, "entry left of pivot {col}");
            }
        }
        assert_eq!(count, d.rank());
    }

    #[test]
    fn first_codeword_is_innovative() {
        let mut d = DecoderState::new(Field::gf2(), 0, 4, 1);
        assert_eq!(
            d.absorb(&bin_cw("0110", vec![3])).unwrap(),
            Absorb::Innovative
        );
        assert_eq!(d.rank(), 1);
        assert_eq!(
            d.absorb(&bin_cw("0110", vec![3])).unwrap(),
            Absorb::Redundant
        );
        assert_eq!(d.rank(), 1);
        assert_eq!(d.redundant(), 1);
    }

    #[test]
    fn span_member_is_redundant() {
        let mut d = DecoderState::new(Field::gf2(), 0, 4, 0);
        d.absorb(&bin_cw("1100", vec![])).unwrap();
        d.absorb(&bin_cw("0110", vec![])).unwrap();
        assert_eq!(
            d.absorb(&bin_cw("1010", vec![])).unwrap(),
            Absorb::Redundant
        );
        assert_eq!(
            d.absorb(&bin_cw("0000", vec![])).unwrap(),
            Absorb::Redundant
        );
        assert_eq!(
            d.absorb(&bin_cw("0001", vec![])).unwrap(),
            Absorb::Innovative
        );
        assert_echelon(&d);
    }

    #[test]
    fn mismatches_are_errors() {
        let mut d = DecoderState::new(Field::gf2(), 3, 4, 2);
        let mut cw = bin_cw("1000", vec![1, 2]);
        assert!(matches!(
            d.absorb(&cw),
            Err(CodecError::PageMismatch { .. })
        ));
        cw.page_id = 3;
        cw.payload = vec![1];
        assert!(matches!(
            d.absorb(&cw),
            Err(CodecError::PayloadLength { .. })
        ));
        cw.payload = vec![1, 2];
        cw.coefficients = CoefficientVector::Byte(vec![1, 0, 0, 0]);
        assert!(matches!(
            d.absorb(&cw),
            Err(CodecError::FieldMismatch { .. })
        ));
        cw.coefficients = CoefficientVector::Binary(BitVector::zeros(5));
        assert!(matches!(
            d.absorb(&cw),
            Err(CodecError::CoefficientCount { .. })
        ));
        assert_eq!(d.received(), 0);
    }

    #[test]
    fn decode_requires_full_rank() {
        let mut d = DecoderState::new(Field::gf256(), 0, 3, 1);
        assert_eq!(
            d.decode(),
            Err(CodecError::InsufficientRank { rank: 0, k: 3 })
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(d.recode(&mut rng), Err(CodecError::NothingToRecode));
    }

    #[test]
    fn identity_rows_decode_verbatim() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let page = Page::random(0, 5, 20, &mut rng);
        for field in [Field::gf2(), Field::gf256()] {
            let mut d = DecoderState::new(field.clone(), 0, 5, 20);
            for i in 0..5 {
                d.absorb(&Codeword::systematic(&page, i, field.spec()))
                    .unwrap();
            }
            assert_eq!(d.decode().unwrap(), page);
            assert_eq!(d.row_ops().total(), 0);
        }
    }

    #[test]
    fn motivating_example_round_trip() {
        // Four packets; two peers each miss some; together they decode.
        let mut rng = ChaCha8Rng::seed_from_u64(2016);
        let page = Page::random(0, 4, 20, &mut rng);
        let field = Field::gf2();
        let mut a = DecoderState::new(field.clone(), 0, 4, 20);
        let mut b = DecoderState::new(field.clone(), 0, 4, 20);
        for i in [0, 2, 3] {
            a.absorb(&Codeword::systematic(&page, i, field.spec()))
                .unwrap();
        }
        for i in [1, 2] {
            b.absorb(&Codeword::systematic(&page, i, field.spec()))
                .unwrap();
        }
        while !a.is_complete() {
            a.absorb(&b.recode(&mut rng).unwrap()).unwrap();
        }
        while !b.is_complete() {
            b.absorb(&a.recode(&mut rng).unwrap()).unwrap();
        }
        assert_eq!(a.decode().unwrap(), page);
        assert_eq!(b.decode().unwrap(), page);
    }

    #[test]
    fn single_row_recodes_to_itself() {
        let mut d = DecoderState::new(Field::gf2(), 0, 4, 1);
        d.absorb(&bin_cw("0011", vec![7])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(d.recode(&mut rng).unwrap(), bin_cw("0011", vec![7]));
        }
    }

    #[test]
    fn probe_leaves_state_untouched() {
        let mut d = DecoderState::new(Field::gf256(), 0, 3, 0);
        let cw = Codeword {
            page_id: 0,
            coefficients: CoefficientVector::Byte(vec![0, 5, 9]),
            payload: vec![],
        };
        d.absorb(&cw).unwrap();
        let ops = d.row_ops();
        assert!(d.is_innovative(&CoefficientVector::Byte(vec![1, 0, 0])));
        let f = Field::gf256();
        let scaled: Vec<u8> = [0u8, 5, 9].iter().map(|&x| f.mul_raw(x, 0x33)).collect();
        assert!(!d.is_innovative(&CoefficientVector::Byte(scaled)));
        assert_eq!(d.row_ops(), ops);
        assert_eq!(d.rank(), 1);
    }

    #[test]
    fn overhead_k1_binary_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            expected_overhead_trial(1, FieldSpec::GF2, 100, &mut rng),
            0.0
        );
    }

    #[test]
    fn overhead_gf256_is_small() {
        // Σ_{i≥1} q^{-i}/(1 − q^{-i}) for q = 256.
        let q = 256f64;
        let bound: f64 = (1..20).map(|i| q.powi(-i) / (1.0 - q.powi(-i))).sum();
        assert!(bound < 0.004);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mean = expected_overhead_trial(32, FieldSpec::GF256, 2000, &mut rng);
        assert!(mean < 0.1, "mean overhead {mean}");
    }

    fn round_trip(field: Field, k: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let page = Page::random(1, k, 20, &mut rng);
        let enc = Encoder::new(field.clone(), DegreeDistribution::UniformRlc, k).unwrap();
        let mut d = DecoderState::new(field, 1, k, 20);
        let mut last_rank = 0;
        while !d.is_complete() {
            let outcome = d.absorb(&enc.encode(&page, &mut rng)).unwrap();
            assert_eq!(outcome == Absorb::Innovative, d.rank() == last_rank + 1);
            assert!(d.rank() >= last_rank);
            last_rank = d.rank();
            assert_echelon(&d);
        }
        assert_eq!(d.decode().unwrap(), page);
    }

    #[test]
    fn row_ops_grow_super_linearly() {
        let mut medians = Vec::new();
        for k in [8usize, 16, 32, 64] {
            let mut ops: Vec<u64> = (0..15)
                .map(|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let page = Page::random(0, k, 20, &mut rng);
                    let enc =
                        Encoder::new(Field::gf256(), DegreeDistribution::UniformRlc, k).unwrap();
                    let mut d = DecoderState::new(Field::gf256(), 0, k, 20);
                    while !d.is_complete() {
                        d.absorb(&enc.encode(&page, &mut rng)).unwrap();
                    }
                    d.decode().unwrap();
                    d.row_ops().coefficient
                })
                .collect();
            ops.sort_unstable();
            medians.push(ops[ops.len() / 2] as f64);
        }
        for w in medians.windows(2) {
            // Doubling k must more than double the work.
            assert!(w[1] > 2.0 * w[0], "{medians:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip_binary(k in 1usize..=64, seed in any::<u64>()) {
            round_trip(Field::gf2(), k, seed);
        }

        #[test]
        fn round_trip_bytes(k in 1usize..=64, seed in any::<u64>()) {
            round_trip(Field::gf256(), k, seed);
        }

        #[test]
        fn recoded_codewords_stay_in_span(k in 1usize..=24, keep in 1usize..=24, seed in any::<u64>(), binary in any::<bool>()) {
            let field = if binary { Field::gf2() } else { Field::gf256() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let page = Page::random(0, k, 4, &mut rng);
            let enc = Encoder::new(field.clone(), DegreeDistribution::UniformRlc, k).unwrap();
            let mut relay = DecoderState::new(field.clone(), 0, k, 4);
            for _ in 0..keep.min(k) {
                relay.absorb(&enc.encode(&page, &mut rng)).unwrap();
            }
            let mut holder = relay.clone();
            let rank = holder.rank();
            for _ in 0..8 {
                let cw = relay.recode(&mut rng).unwrap();
                prop_assert_eq!(holder.absorb(&cw).unwrap(), Absorb::Redundant);
                // Payload must be consistent with the coefficients too.
                let expected = Codeword::combine(&page, cw.coefficients.clone(), &field).unwrap();
                prop_assert_eq!(&cw.payload, &expected.payload);
            }
            prop_assert_eq!(holder.rank(), rank);
        }
    }
}
