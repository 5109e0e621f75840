//! Rectangle protocols, their XOR lift, extension by junk bits, and the
//! restriction construction.
//!
//! Inputs of {−1,1}^M are M-bit masks (bit set means −1), so x·z is x ^ z.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{guard, Error, Result};
use crate::fourier::{brute_fourier, FourierTable};

pub const MAX_ARITY: usize = 22;
/// Largest arity for which the full (x, y) label table is materialised.
pub const TABLE_MAX_ARITY: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rectangle {
    pub label: i8,
    /// Sorted Alice inputs.
    pub alice: Vec<u32>,
    /// Sorted Bob inputs.
    pub bob: Vec<u32>,
}

impl Rectangle {
    pub fn new(label: i8, mut alice: Vec<u32>, mut bob: Vec<u32>) -> Self {
        alice.sort_unstable();
        alice.dedup();
        bob.sort_unstable();
        bob.dedup();
        Self { label, alice, bob }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.alice.binary_search(&x).is_ok() && self.bob.binary_search(&y).is_ok()
    }

    pub fn area(&self) -> u64 {
        self.alice.len() as u64 * self.bob.len() as u64
    }
}

/// A deterministic protocol given extensionally by its leaf rectangles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleProtocol {
    pub arity: usize,
    pub cost: usize,
    pub rectangles: Vec<Rectangle>,
}

fn sorted_disjoint(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}

impl RectangleProtocol {
    /// Builds and validates a protocol.
    pub fn new(arity: usize, cost: usize, rectangles: Vec<Rectangle>) -> Result<Self> {
        let p = Self { arity, cost, rectangles };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(arity: usize, label: i8) -> Result<Self> {
        guard("protocol arity", arity, MAX_ARITY)?;
        let all: Vec<u32> = (0..1u32 << arity).collect();
        Self::new(arity, 0, vec![Rectangle::new(label, all.clone(), all)])
    }

    fn domain(&self) -> u64 {
        1u64 << self.arity
    }

    /// Checks labels, ranges, the rectangle budget 2^cost, and that the
    /// rectangles tile the input square exactly once.
    pub fn validate(&self) -> Result<()> {
        guard("protocol arity", self.arity, MAX_ARITY)?;
        if self.cost < 64 && self.rectangles.len() as u128 > 1u128 << self.cost {
            return Err(Error::Format(format!(
                "{} rectangles exceed the 2^{} budget",
                self.rectangles.len(),
                self.cost
            )));
        }
        let d = self.domain();
        for r in &self.rectangles {
            if r.label != 1 && r.label != -1 {
                return Err(Error::Format(format!("label {} is not a sign", r.label)));
            }
            if r.alice.is_empty() || r.bob.is_empty() {
                return Err(Error::Format("empty rectangle side".into()));
            }
            for side in [&r.alice, &r.bob] {
                if side.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Format("rectangle side not strictly sorted".into()));
                }
                if *side.last().unwrap() as u64 >= d {
                    return Err(Error::OutOfRange { index: *side.last().unwrap() as usize, len: d as usize });
                }
            }
        }
        let area: u64 = self.rectangles.iter().map(Rectangle::area).sum();
        if area != d * d {
            return Err(Error::Format(format!("rectangles cover area {area}, square has {}", d * d)));
        }
        if self.arity <= TABLE_MAX_ARITY {
            let mut seen = vec![false; (d * d) as usize];
            for r in &self.rectangles {
                for &x in &r.alice {
                    for &y in &r.bob {
                        let cell = &mut seen[(x as u64 * d + y as u64) as usize];
                        if *cell {
                            return Err(Error::Format(format!("cell ({x}, {y}) covered twice")));
                        }
                        *cell = true;
                    }
                }
            }
        } else {
            for (i, r) in self.rectangles.iter().enumerate() {
                for s in &self.rectangles[..i] {
                    if !sorted_disjoint(&r.alice, &s.alice) && !sorted_disjoint(&r.bob, &s.bob) {
                        return Err(Error::Format("overlapping rectangles".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: u32, y: u32) -> Result<i8> {
        self.rectangles
            .iter()
            .find(|r| r.contains(x, y))
            .map(|r| r.label)
            .ok_or(Error::OutOfRange { index: x.max(y) as usize, len: self.domain() as usize })
    }

    /// Label of every cell, indexed by x·2^M + y.
    pub fn label_table(&self) -> Result<Vec<i8>> {
        guard("table arity", self.arity, TABLE_MAX_ARITY)?;
        let d = self.domain() as usize;
        let mut t = vec![0i8; d * d];
        for r in &self.rectangles {
            for &x in &r.alice {
                let row = &mut t[x as usize * d..(x as usize + 1) * d];
                for &y in &r.bob {
                    row[y as usize] = r.label;
                }
            }
        }
        Ok(t)
    }

    /// Largest l with every side of size at most 2^{M−l}.
    pub fn min_cost(&self) -> usize {
        self.rectangles
            .iter()
            .flat_map(|r| [r.alice.len(), r.bob.len()])
            .map(|s| self.arity - s.next_power_of_two().trailing_zeros() as usize)
            .min()
            .unwrap_or(self.arity)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// H_C(z) = E_x C(x, x·z), by direct count over the rectangles.
pub fn xor_lift_value(c: &RectangleProtocol, z: u32) -> Result<f64> {
    guard("lift arity", c.arity, MAX_ARITY)?;
    let mut total = 0i64;
    for r in &c.rectangles {
        let hits = r.alice.iter().filter(|&&x| r.bob.binary_search(&(x ^ z)).is_ok()).count();
        total += r.label as i64 * hits as i64;
    }
    Ok(total as f64 / (1u64 << c.arity) as f64)
}

/// H_C at every z.
pub fn xor_lift_table(c: &RectangleProtocol) -> Result<Vec<f64>> {
    let d = 1usize << c.arity;
    if c.arity > TABLE_MAX_ARITY {
        return (0..d as u32).map(|z| xor_lift_value(c, z)).collect();
    }
    let t = c.label_table()?;
    let mut out = vec![0.0; d];
    for x in 0..d {
        let row = &t[x * d..(x + 1) * d];
        for (z, o) in out.iter_mut().enumerate() {
            *o += row[x ^ z] as f64;
        }
    }
    out.iter_mut().for_each(|v| *v /= d as f64);
    Ok(out)
}

/// Spectrum of H_C as Σ_R label·1̂_A(S)·1̂_B(S).
pub fn lift_fourier_via_rectangles(c: &RectangleProtocol) -> Result<FourierTable> {
    let d = 1usize << c.arity;
    let mut acc = vec![0.0; d];
    let indicator = |side: &[u32]| {
        let mut t = vec![0.0; d];
        side.iter().for_each(|&v| t[v as usize] = 1.0);
        brute_fourier(&t)
    };
    for r in &c.rectangles {
        let a = indicator(&r.alice)?;
        let b = indicator(&r.bob)?;
        for ((o, x), y) in acc.iter_mut().zip(a.coefficients()).zip(b.coefficients()) {
            *o += r.label as f64 * x * y;
        }
    }
    FourierTable::from_coefficients(acc)
}

/// ext^l(C): both players first announce their last l bits.
pub fn extend_protocol(c: &RectangleProtocol, l: usize) -> Result<RectangleProtocol> {
    if l == 0 {
        return Err(Error::InvalidParameter("extension needs l >= 1".into()));
    }
    guard("extended arity", c.arity + l, MAX_ARITY)?;
    let shift = c.arity;
    let mut rects = Vec::with_capacity(c.rectangles.len() << (2 * l));
    for a in 0..1u32 << l {
        for b in 0..1u32 << l {
            for r in &c.rectangles {
                let alice = r.alice.iter().map(|&x| x | a << shift).collect();
                let bob = r.bob.iter().map(|&y| y | b << shift).collect();
                rects.push(Rectangle { label: r.label, alice, bob });
            }
        }
    }
    Ok(RectangleProtocol { arity: c.arity + l, cost: c.cost + 2 * l, rectangles: rects })
}

/// E_{z'} H_{ext}(z, z') as a function of the first M bits.
pub fn junk_averaged_lift(ext: &RectangleProtocol, l: usize) -> Result<Vec<f64>> {
    if l > ext.arity {
        return Err(Error::InvalidParameter("more junk bits than inputs".into()));
    }
    let full = xor_lift_table(ext)?;
    let m = ext.arity - l;
    let mut out = vec![0.0; 1 << m];
    for (z, v) in full.iter().enumerate() {
        out[z & ((1 << m) - 1)] += v;
    }
    out.iter_mut().for_each(|v| *v /= (1u64 << l) as f64);
    Ok(out)
}

/// A protocol tree of the given depth with random speakers, random splits
/// of the speaker's current set, and random leaf labels.
pub fn random_protocol<R: Rng + ?Sized>(arity: usize, depth: usize, rng: &mut R) -> Result<RectangleProtocol> {
    guard("protocol arity", arity, TABLE_MAX_ARITY)?;
    let all: Vec<u32> = (0..1u32 << arity).collect();
    let mut rects = Vec::new();
    grow(all.clone(), all, depth, rng, &mut rects);
    RectangleProtocol::new(arity, depth, rects)
}

fn split<R: Rng + ?Sized>(mut set: Vec<u32>, rng: &mut R) -> (Vec<u32>, Vec<u32>) {
    set.shuffle(rng);
    let cut = rng.random_range(1..set.len());
    let right = set.split_off(cut);
    (set, right)
}

fn grow<R: Rng + ?Sized>(a: Vec<u32>, b: Vec<u32>, depth: usize, rng: &mut R, out: &mut Vec<Rectangle>) {
    if depth == 0 || (a.len() == 1 && b.len() == 1) {
        let label = if rng.random::<bool>() { 1 } else { -1 };
        out.push(Rectangle::new(label, a, b));
        return;
    }
    let alice_speaks = if a.len() == 1 {
        false
    } else if b.len() == 1 {
        true
    } else {
        rng.random::<bool>()
    };
    if alice_speaks {
        let (l, r) = split(a, rng);
        grow(l, b.clone(), depth - 1, rng, out);
        grow(r, b, depth - 1, rng, out);
    } else {
        let (l, r) = split(b, rng);
        grow(a.clone(), l, depth - 1, rng, out);
        grow(a, r, depth - 1, rng, out);
    }
}

/// A finite distribution over protocols of one arity.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolMixture {
    pub components: Vec<(f64, RectangleProtocol)>,
}

impl ProtocolMixture {
    pub fn single(c: RectangleProtocol) -> Self {
        Self { components: vec![(1.0, c)] }
    }

    pub fn arity(&self) -> usize {
        self.components.first().map_or(0, |c| c.1.arity)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &RectangleProtocol {
        let mut u = rng.random::<f64>();
        for (w, c) in &self.components {
            if u < *w {
                return c;
            }
            u -= w;
        }
        &self.components.last().expect("non-empty mixture").1
    }

    /// E_{z'} H_{ext^l(𝒞)}(z, z') at every z, built from the extended
    /// protocols themselves.
    pub fn extended_lift(&self, l: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; 1 << self.arity()];
        for (w, c) in &self.components {
            let h = junk_averaged_lift(&extend_protocol(c, l)?, l)?;
            out.iter_mut().zip(&h).for_each(|(o, v)| *o += w * v);
        }
        Ok(out)
    }
}

/// v ∈ {−1, 1, 0}^M as two masks: which coordinates are fixed and, among
/// those, which are fixed to −1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Restriction {
    pub arity: usize,
    pub fixed: u32,
    pub minus: u32,
}

impl Restriction {
    pub fn free(arity: usize) -> Self {
        Self { arity, fixed: 0, minus: 0 }
    }

    pub fn from_values(v: &[i8]) -> Result<Self> {
        let mut r = Self::free(v.len());
        for (i, &s) in v.iter().enumerate() {
            match s {
                0 => {}
                1 => r.fixed |= 1 << i,
                -1 => {
                    r.fixed |= 1 << i;
                    r.minus |= 1 << i;
                }
                other => return Err(Error::Format(format!("restriction value {other}"))),
            }
        }
        Ok(r)
    }

    pub fn random<R: Rng + ?Sized>(arity: usize, rng: &mut R) -> Self {
        let v: Vec<i8> = (0..arity).map(|_| rng.random_range(-1..=1)).collect();
        Self::from_values(&v).expect("values in range")
    }

    /// ρ_v(z).
    pub fn apply(&self, z: u32) -> u32 {
        (z & !self.fixed) | self.minus
    }
}

/// Overwrites the fixed coordinates of `x` with the bits of `values`.
fn overwrite(x: u32, fixed: u32, values: u32) -> u32 {
    (x & !fixed) | (values & fixed)
}

fn pull_back(side: &[u32], arity: usize, fixed: u32, values: u32) -> Vec<u32> {
    (0..1u32 << arity).filter(|&x| side.binary_search(&overwrite(x, fixed, values)).is_ok()).collect()
}

/// The protocol in which, for each fixed j, Alice replaces bit j by a_j and
/// Bob by a_j·v_j.
pub fn overwrite_protocol(c: &RectangleProtocol, v: &Restriction, a: u32) -> Result<RectangleProtocol> {
    let bob_values = a ^ v.minus;
    let rects = c
        .rectangles
        .iter()
        .filter_map(|r| {
            let alice = pull_back(&r.alice, c.arity, v.fixed, a);
            let bob = pull_back(&r.bob, c.arity, v.fixed, bob_values);
            (!alice.is_empty() && !bob.is_empty()).then_some(Rectangle { label: r.label, alice, bob })
        })
        .collect();
    RectangleProtocol::new(c.arity, c.cost, rects)
}

/// 𝒞_v as an explicit mixture over every choice of the random bits a.
pub fn restrict_xor_protocol(mix: &ProtocolMixture, v: &Restriction) -> Result<ProtocolMixture> {
    let fixed: Vec<u32> = (0..v.arity as u32).filter(|&j| v.fixed >> j & 1 == 1).collect();
    let count = 1u32 << fixed.len();
    let mut components = Vec::with_capacity(mix.components.len() * count as usize);
    for (w, c) in &mix.components {
        for bits in 0..count {
            let a = fixed.iter().enumerate().fold(0u32, |m, (i, &j)| m | ((bits >> i & 1) << j));
            components.push((w / count as f64, overwrite_protocol(c, v, a)?));
        }
    }
    Ok(ProtocolMixture { components })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictionCheck {
    pub max_deviation: f64,
    pub points: usize,
}

/// Both sides of E_{z'}[H_{ext^l(𝒞_v)}(z, z')] = H(ρ_v(z)) at every z.
pub fn check_restriction_identity(mix: &ProtocolMixture, v: &Restriction, l: usize) -> Result<RestrictionCheck> {
    let lhs = restrict_xor_protocol(mix, v)?.extended_lift(l)?;
    let h = mix.extended_lift(l)?;
    let max_deviation = lhs
        .iter()
        .enumerate()
        .map(|(z, val)| (val - h[v.apply(z as u32) as usize]).abs())
        .fold(0.0, f64::max);
    Ok(RestrictionCheck { max_deviation, points: lhs.len() })
}
