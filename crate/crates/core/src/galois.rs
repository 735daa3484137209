//! Arithmetic over GF(2) and GF(2^8).
//!
//! GF(2) elements are single bits and are handled in bulk by the bit-packed
//! vectors in [`crate::codec`]. GF(2^8) multiplication is table driven: a
//! full 256×256 product table (q² bytes) plus log/antilog tables built from a
//! generator of the multiplicative group. Both lookups go through the same
//! [`Field`] interface.

use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

/// x^8 + x^4 + x^3 + x + 1.
pub const DEFAULT_POLY: u16 = 0x11B;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GaloisError {
    #[error("operands belong to different fields ({left} vs {right})")]
    MixedFields { left: FieldSpec, right: FieldSpec },
    #[error("division by zero")]
    DivisionByZero,
    #[error("unsupported field order {0} (expected 2 or 256)")]
    UnsupportedOrder(u16),
    #[error("reduction polynomial {0:#x} is not an irreducible degree-8 polynomial")]
    ReducibleModulus(u16),
    #[error("value {value} is not an element of GF({order})")]
    ValueOutOfRange { value: u16, order: u16 },
}

/// Field order plus, for GF(2^8), the reduction polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    order: u16,
    poly: u16,
}

impl FieldSpec {
    pub const GF2: FieldSpec = FieldSpec { order: 2, poly: 0 };
    pub const GF256: FieldSpec = FieldSpec {
        order: 256,
        poly: DEFAULT_POLY,
    };

    pub fn new(order: u16, poly: u16) -> Result<Self, GaloisError> {
        match order {
            2 => Ok(Self::GF2),
            256 => {
                if !is_irreducible(poly) {
                    return Err(GaloisError::ReducibleModulus(poly));
                }
                Ok(FieldSpec { order, poly })
            }
            other => Err(GaloisError::UnsupportedOrder(other)),
        }
    }

    pub fn order(&self) -> u16 {
        self.order
    }

    /// Reduction polynomial; zero for GF(2).
    pub fn poly(&self) -> u16 {
        self.poly
    }

    pub fn is_binary(&self) -> bool {
        self.order == 2
    }

    /// log2(q): width of one coefficient in a packet header.
    pub fn bits_per_symbol(&self) -> u32 {
        if self.is_binary() {
            1
        } else {
            8
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_binary() {
            write!(f, "GF(2)")
        } else {
            write!(f, "GF(256)/{:#x}", self.poly)
        }
    }
}

/// One element of a [`FieldSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u8,
    field: FieldSpec,
}

impl FieldElement {
    pub fn value(&self) -> u8 {
        self.value
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }
}

/// Carry-less multiply of `a` and `b` reduced modulo `poly`.
///
/// This is the slow reference path; table construction is built on it.
pub fn poly_mul(mut a: u8, mut b: u8, poly: u16) -> u8 {
    let reduce = (poly & 0xFF) as u8;
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= reduce;
        }
        b >>= 1;
    }
    acc
}

fn poly_degree(p: u32) -> i32 {
    31 - p.leading_zeros() as i32
}

fn poly_rem(mut num: u32, den: u32) -> u32 {
    let dd = poly_degree(den);
    while num != 0 && poly_degree(num) >= dd {
        num ^= den << (poly_degree(num) - dd);
    }
    num
}

/// True when `poly` has degree 8 and no factor of degree 1..=4 over GF(2).
pub fn is_irreducible(poly: u16) -> bool {
    let p = poly as u32;
    if poly_degree(p) != 8 {
        return false;
    }
    (2u32..32).all(|d| poly_rem(p, d) != 0)
}

/// Precomputed GF(2^8) multiplication tables.
pub struct MulTables {
    poly: u16,
    generator: u8,
    product: Box<[u8]>,
    log: [u8; 256],
    exp: [u8; 512],
}

impl MulTables {
    fn build(poly: u16) -> Self {
        let mut product = vec![0u8; 256 * 256].into_boxed_slice();
        for a in 0..256usize {
            for b in a..256usize {
                let p = poly_mul(a as u8, b as u8, poly);
                product[a * 256 + b] = p;
                product[b * 256 + a] = p;
            }
        }
        // Not every irreducible polynomial makes x primitive, so search.
        let generator = (2u16..256)
            .map(|g| g as u8)
            .find(|&g| multiplicative_order(g, poly) == 255)
            .expect("multiplicative group of GF(256) is cyclic");
        let mut log = [0u8; 256];
        let mut exp = [0u8; 512];
        let mut x = 1u8;
        for i in 0..255 {
            exp[i] = x;
            exp[i + 255] = x;
            log[x as usize] = i as u8;
            x = poly_mul(x, generator, poly);
        }
        exp[510] = exp[0];
        exp[511] = exp[1];
        MulTables {
            poly,
            generator,
            product,
            log,
            exp,
        }
    }

    pub fn poly(&self) -> u16 {
        self.poly
    }

    pub fn generator(&self) -> u8 {
        self.generator
    }

    /// Full q×q product table lookup.
    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        self.product[((a as usize) << 8) | b as usize]
    }

    /// Row `a` of the product table: `row(a)[x] == a·x`.
    #[inline]
    pub fn row(&self, a: u8) -> &[u8] {
        let start = (a as usize) << 8;
        &self.product[start..start + 256]
    }

    /// Product through the log/antilog tables.
    #[inline]
    pub fn mul_log(&self, a: u8, b: u8) -> u8 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    pub fn inv(&self, a: u8) -> Option<u8> {
        if a == 0 {
            return None;
        }
        Some(self.exp[255 - self.log[a as usize] as usize])
    }

    /// Bytes held by the full product table.
    pub fn product_table_bytes(&self) -> usize {
        self.product.len()
    }

    /// Bytes held by the log and antilog tables.
    pub fn log_table_bytes(&self) -> usize {
        self.log.len() + self.exp.len()
    }
}

impl fmt::Debug for MulTables {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MulTables")
            .field("poly", &format_args!("{:#x}", self.poly))
            .field("generator", &self.generator)
            .finish_non_exhaustive()
    }
}

fn multiplicative_order(g: u8, poly: u16) -> u32 {
    let mut x = g;
    let mut n = 1;
    while x != 1 {
        x = poly_mul(x, g, poly);
        n += 1;
        if n > 255 {
            return 0;
        }
    }
    n
}

fn default_tables() -> Arc<MulTables> {
    static TABLES: OnceLock<Arc<MulTables>> = OnceLock::new();
    TABLES
        .get_or_init(|| Arc::new(MulTables::build(DEFAULT_POLY)))
        .clone()
}

/// Builds the multiplication tables for `spec`. GF(2) needs none.
pub fn build_tables(spec: FieldSpec) -> Option<Arc<MulTables>> {
    if spec.is_binary() {
        None
    } else if spec.poly == DEFAULT_POLY {
        Some(default_tables())
    } else {
        Some(Arc::new(MulTables::build(spec.poly)))
    }
}

/// A field together with its lookup tables. Cheap to clone.
#[derive(Clone, Debug)]
pub struct Field {
    spec: FieldSpec,
    tables: Option<Arc<MulTables>>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Field {
    pub fn new(spec: FieldSpec) -> Self {
        Field {
            spec,
            tables: build_tables(spec),
        }
    }

    pub fn gf2() -> Self {
        Self::new(FieldSpec::GF2)
    }

    pub fn gf256() -> Self {
        Self::new(FieldSpec::GF256)
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn tables(&self) -> Option<&MulTables> {
        self.tables.as_deref()
    }

    pub fn element(&self, value: u16) -> Result<FieldElement, GaloisError> {
        if value >= self.spec.order {
            return Err(GaloisError::ValueOutOfRange {
                value,
                order: self.spec.order,
            });
        }
        Ok(FieldElement {
            value: value as u8,
            field: self.spec,
        })
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement {
            value: 0,
            field: self.spec,
        }
    }

    pub fn one(&self) -> FieldElement {
        FieldElement {
            value: 1,
            field: self.spec,
        }
    }

    fn check(&self, a: FieldElement, b: FieldElement) -> Result<(), GaloisError> {
        for x in [a, b] {
            if x.field != self.spec {
                return Err(GaloisError::MixedFields {
                    left: self.spec,
                    right: x.field,
                });
            }
        }
        Ok(())
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, GaloisError> {
        self.check(a, b)?;
        Ok(FieldElement {
            value: a.value ^ b.value,
            field: self.spec,
        })
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, GaloisError> {
        self.check(a, b)?;
        Ok(FieldElement {
            value: self.mul_raw(a.value, b.value),
            field: self.spec,
        })
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, GaloisError> {
        self.check(a, a)?;
        let value = self.inv_raw(a.value).ok_or(GaloisError::DivisionByZero)?;
        Ok(FieldElement {
            value,
            field: self.spec,
        })
    }

    #[inline]
    pub(crate) fn mul_raw(&self, a: u8, b: u8) -> u8 {
        match &self.tables {
            Some(t) => t.mul(a, b),
            None => a & b,
        }
    }

    #[inline]
    pub(crate) fn inv_raw(&self, a: u8) -> Option<u8> {
        match &self.tables {
            Some(t) => t.inv(a),
            None => (a == 1).then_some(1),
        }
    }

    /// `dst += c · src`, element-wise over bytes.
    ///
    /// For GF(2) each byte is eight packed payload bits and `c` is 0 or 1.
    pub fn mul_add_slice(&self, dst: &mut [u8], src: &[u8], c: u8) {
        debug_assert_eq!(dst.len(), src.len());
        match (c, &self.tables) {
            (0, _) => {}
            (1, _) | (_, None) => dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= s),
            (c, Some(t)) => {
                let row = t.row(c);
                dst.iter_mut()
                    .zip(src)
                    .for_each(|(d, &s)| *d ^= row[s as usize]);
            }
        }
    }

    /// `dst *= c`, element-wise over bytes.
    pub fn scale_slice(&self, dst: &mut [u8], c: u8) {
        match (c, &self.tables) {
            (1, _) => {}
            (0, _) => dst.fill(0),
            (_, None) => {}
            (c, Some(t)) => {
                let row = t.row(c);
                dst.iter_mut().for_each(|d| *d = row[*d as usize]);
            }
        }
    }
}
