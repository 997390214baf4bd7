//! Dyadic cubes, closed cubes, tiles, trees and the tree-adapted partition.
//!
//! All dyadic arithmetic is exact integer arithmetic on `(scale, index)`.
//! Dyadic cubes are half-open, `Cube` is closed.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pow2, GridSpec, Lattice};

/// Strict lexicographic order on points of R^n.
pub fn lex_less(x: &[f64], y: &[f64]) -> bool {
    for (a, b) in x.iter().zip(y) {
        if a < b {
            return true;
        }
        if a > b {
            return false;
        }
    }
    false
}

/// Floor division of `x` by `2^shift`.
fn shr_floor(x: i64, shift: u32) -> i64 {
    if shift >= 63 {
        if x < 0 {
            -1
        } else {
            0
        }
    } else {
        x >> shift
    }
}

/// The half-open cube `prod_j [m_j / 2^nu, (m_j + 1) / 2^nu)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    dim: u8,
    scale: i32,
    index: Lattice,
}

impl DyadicCube {
    pub fn new(dim: usize, scale: i32, index: &[i64]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(dim));
        }
        if index.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "index has {} coordinates, expected {dim}",
                index.len()
            )));
        }
        let mut idx = [0i64; 2];
        idx[..dim].copy_from_slice(index);
        Ok(Self { dim: dim as u8, scale, index: idx })
    }

    pub(crate) fn from_parts(dim: usize, scale: i32, index: Lattice) -> Self {
        Self { dim: dim as u8, scale, index }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// The scale `nu`; the side is `2^-nu`.
    pub fn scale(&self) -> i32 {
        self.scale
    }

    pub fn index(&self) -> &[i64] {
        &self.index[..self.dim()]
    }

    pub(crate) fn raw_index(&self) -> Lattice {
        self.index
    }

    pub fn side_length(&self) -> f64 {
        pow2(-self.scale)
    }

    pub fn volume(&self) -> f64 {
        self.side_length().powi(self.dim as i32)
    }

    pub fn center(&self) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (j, cj) in c.iter_mut().enumerate().take(self.dim()) {
            *cj = (2 * self.index[j] + 1) as f64 * pow2(-self.scale - 1);
        }
        c
    }

    /// Lower corner.
    pub fn corner(&self) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (j, cj) in c.iter_mut().enumerate().take(self.dim()) {
            *cj = self.index[j] as f64 * pow2(-self.scale);
        }
        c
    }

    /// Half-open membership.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        let side = self.side_length();
        (0..self.dim()).all(|j| {
            let lo = self.index[j] as f64 * side;
            x[j] >= lo && x[j] < lo + side
        })
    }

    /// Exact inclusion `other ⊆ self`.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        if self.dim != other.dim || other.scale < self.scale {
            return false;
        }
        let shift = (other.scale - self.scale) as u32;
        (0..self.dim()).all(|j| shr_floor(other.index[j], shift) == self.index[j])
    }

    pub fn intersects(&self, other: &DyadicCube) -> bool {
        self.contains(other) || other.contains(self)
    }

    /// The unique ancestor (or self) at a coarser-or-equal scale.
    pub fn ancestor(&self, scale: i32) -> Option<DyadicCube> {
        if scale > self.scale {
            return None;
        }
        let shift = (self.scale - scale) as u32;
        let mut idx = self.index;
        for v in idx.iter_mut().take(self.dim()) {
            *v = shr_floor(*v, shift);
        }
        Some(Self { dim: self.dim, scale, index: idx })
    }

    pub fn parent(&self) -> DyadicCube {
        self.ancestor(self.scale - 1).expect("parent scale is coarser")
    }

    /// The `i`-th child (1-based) in the lexicographic order of centers.
    pub fn child(&self, i: usize) -> DyadicCube {
        let n = self.dim();
        assert!(i >= 1 && i <= 1 << n, "child index {i} out of range");
        let bits = i - 1;
        let mut idx = [0i64; 2];
        for (j, v) in idx.iter_mut().enumerate().take(n) {
            let b = (bits >> (n - 1 - j)) & 1;
            *v = 2 * self.index[j] + b as i64;
        }
        Self { dim: self.dim, scale: self.scale + 1, index: idx }
    }

    /// All `2^n` children, strictly increasing in the lexicographic order of
    /// their centers.
    pub fn children_ordered(&self) -> Vec<DyadicCube> {
        (1..=(1usize << self.dim())).map(|i| self.child(i)).collect()
    }

    /// The closure of this cube as a closed `Cube`.
    pub fn closure(&self) -> Cube {
        Cube { dim: self.dim, center: self.center(), half_width: self.side_length() / 2.0 }
    }

    /// Whether the frequency integer `k` (value `k * 2^-p`) lies in this cube.
    pub fn contains_freq(&self, k: Lattice, p: i32) -> bool {
        // k * 2^-p in [m 2^-s, (m+1) 2^-s)  <=>  floor(k * 2^(s-p)) == m
        let e = self.scale - p;
        (0..self.dim()).all(|j| {
            let v = if e >= 0 {
                if e >= 62 {
                    return false;
                }
                k[j] << e
            } else {
                shr_floor(k[j], (-e) as u32)
            };
            v == self.index[j]
        })
    }
}

impl Ord for DyadicCube {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.dim, self.scale, self.index).cmp(&(other.dim, other.scale, other.index))
    }
}

impl PartialOrd for DyadicCube {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The closed cube `Q(x, r) = { y : max_i |x_i - y_i| <= r }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    dim: u8,
    center: [f64; 2],
    half_width: f64,
}

impl Cube {
    pub fn new(center: &[f64], half_width: f64) -> Result<Self> {
        let dim = center.len();
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(dim));
        }
        if !(half_width > 0.0) {
            return Err(Error::InvalidArgument(format!("half-width {half_width} must be positive")));
        }
        let mut c = [0.0; 2];
        c[..dim].copy_from_slice(center);
        Ok(Self { dim: dim as u8, center: c, half_width })
    }

    /// `Q(r)`, the cube centered at the origin.
    pub fn centered(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(&vec![0.0; dim], half_width)
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn side_length(&self) -> f64 {
        2.0 * self.half_width
    }

    /// `kappa Q = Q(x, kappa r)`.
    pub fn dilate(&self, kappa: f64) -> Cube {
        Cube { half_width: self.half_width * kappa, ..*self }
    }

    /// Sup-norm distance from the center.
    pub fn sup_offset(&self, y: &[f64]) -> f64 {
        (0..self.dim()).map(|j| (y[j] - self.center[j]).abs()).fold(0.0, f64::max)
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.sup_offset(y) <= self.half_width
    }

    pub fn disjoint(&self, other: &Cube) -> bool {
        (0..self.dim()).any(|j| {
            (self.center[j] - other.center[j]).abs() > self.half_width + other.half_width
        })
    }

    /// `self ⊆ other` for closed cubes.
    pub fn inside(&self, other: &Cube) -> bool {
        (0..self.dim()).all(|j| {
            self.center[j] - self.half_width >= other.center[j] - other.half_width
                && self.center[j] + self.half_width <= other.center[j] + other.half_width
        })
    }
}

/// A tile `I_s x omega_s` with `l(I_s) * l(omega_s) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TileRepr", into = "TileRepr")]
pub struct Tile {
    spatial: DyadicCube,
    frequency: DyadicCube,
}

#[derive(Serialize, Deserialize)]
struct TileRepr {
    nu: i32,
    m: Vec<i64>,
    m_freq: Vec<i64>,
}

impl TryFrom<TileRepr> for Tile {
    type Error = Error;

    fn try_from(r: TileRepr) -> Result<Self> {
        Tile::new(r.nu, &r.m, &r.m_freq)
    }
}

impl From<Tile> for TileRepr {
    fn from(t: Tile) -> Self {
        TileRepr {
            nu: t.scale(),
            m: t.spatial.index().to_vec(),
            m_freq: t.frequency.index().to_vec(),
        }
    }
}

impl Tile {
    /// `Q_{nu m} x Q_{-nu m'}`.
    pub fn new(nu: i32, m: &[i64], m_freq: &[i64]) -> Result<Self> {
        if m.len() != m_freq.len() {
            return Err(Error::InvalidTile("spatial and frequency dimensions differ".into()));
        }
        let spatial = DyadicCube::new(m.len(), nu, m)?;
        let frequency = DyadicCube::new(m.len(), -nu, m_freq)?;
        Ok(Self { spatial, frequency })
    }

    pub fn from_cubes(spatial: DyadicCube, frequency: DyadicCube) -> Result<Self> {
        if spatial.dim() != frequency.dim() || spatial.scale() != -frequency.scale() {
            return Err(Error::InvalidTile(format!(
                "scales {} and {} are not opposite",
                spatial.scale(),
                frequency.scale()
            )));
        }
        Ok(Self { spatial, frequency })
    }

    pub fn dim(&self) -> usize {
        self.spatial.dim()
    }

    /// The spatial scale `nu`: `l(I_s) = 2^-nu`, `l(omega_s) = 2^nu`.
    pub fn scale(&self) -> i32 {
        self.spatial.scale()
    }

    pub fn spatial(&self) -> &DyadicCube {
        &self.spatial
    }

    pub fn frequency(&self) -> &DyadicCube {
        &self.frequency
    }

    /// `omega_{s(i)}`, 1-based.
    pub fn freq_child(&self, i: usize) -> DyadicCube {
        self.frequency.child(i)
    }

    /// `omega_{s(2^n)}`.
    pub fn last_freq_child(&self) -> DyadicCube {
        self.frequency.child(1 << self.dim())
    }

    /// `|I_s|`.
    pub fn spatial_volume(&self) -> f64 {
        self.spatial.volume()
    }
}

impl Ord for Tile {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.spatial, self.frequency).cmp(&(other.spatial, other.frequency))
    }
}

impl PartialOrd for Tile {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The tile order: `u <= v` iff `I_u ⊆ I_v` and `omega_u ⊇ omega_v`.
pub fn tile_le(u: &Tile, v: &Tile) -> bool {
    v.spatial.contains(&u.spatial) && u.frequency.contains(&v.frequency)
}

/// A finite tile set with a designated top dominating every member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TreeRepr", into = "TreeRepr")]
pub struct Tree {
    top: Tile,
    tiles: Vec<Tile>,
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    top: Tile,
    tiles: Vec<Tile>,
}

impl TryFrom<TreeRepr> for Tree {
    type Error = Error;

    fn try_from(r: TreeRepr) -> Result<Self> {
        Tree::new(r.top, r.tiles)
    }
}

impl From<Tree> for TreeRepr {
    fn from(t: Tree) -> Self {
        TreeRepr { top: t.top, tiles: t.tiles }
    }
}

impl Tree {
    pub fn new(top: Tile, mut tiles: Vec<Tile>) -> Result<Self> {
        if let Some(bad) = tiles.iter().find(|s| !tile_le(s, &top)) {
            return Err(Error::InvalidTree(format!("{bad:?} is not below the top")));
        }
        tiles.sort();
        tiles.dedup();
        Ok(Self { top, tiles })
    }

    pub fn top(&self) -> &Tile {
        &self.top
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Whether `omega_{t(i)} ⊆ omega_{s(i)}` for every member `s`.
    pub fn is_i_tree(&self, i: usize) -> bool {
        let top_child = self.top.freq_child(i);
        self.tiles.iter().all(|s| s.freq_child(i).contains(&top_child))
    }
}

/// Whether `inner ⊆ 3 * outer` on the torus of side `2^p`, exactly.
fn inside_tripled(inner: &DyadicCube, outer: &DyadicCube, p: i32) -> bool {
    // Work in units of 2^-fine where both cubes have integer coordinates.
    let fine = inner.scale().max(outer.scale()).max(-p);
    let unit = |scale: i32| -> i128 { 1i128 << (fine - scale) };
    let torus = unit(-p);
    let ui = unit(inner.scale());
    let uo = unit(outer.scale());
    (0..inner.dim()).all(|j| {
        let a = inner.raw_index()[j] as i128 * ui;
        let b = a + ui;
        let lo = (outer.raw_index()[j] as i128 - 1) * uo;
        let hi = (outer.raw_index()[j] as i128 + 2) * uo;
        if hi - lo >= torus {
            return true;
        }
        (-1..=1).any(|k| a + k * torus >= lo && b + k * torus <= hi)
    })
}

/// The partition `J(T)` of the torus: maximal dyadic cubes `Q` such that no
/// `I_s` (`s` in the tree) is contained in `3Q`, measured on the torus.
pub fn partition_j(tree: &Tree, grid: &GridSpec) -> Result<Vec<DyadicCube>> {
    if tree.is_empty() {
        return Err(Error::InvalidTree("partition of an empty tree".into()));
    }
    let dim = grid.dim();
    if tree.top.dim() != dim {
        return Err(Error::InvalidTree("tree dimension differs from the grid".into()));
    }
    let p = grid.box_exponent();
    let extent = 1i64 << 40;
    for s in tree.tiles() {
        let nu = s.scale();
        if nu < -p || nu > grid.resolution_exponent() + 8 {
            return Err(Error::Unrepresentable(format!("tile scale {nu} out of range")));
        }
        let count = if nu + p >= 40 { extent } else { 1i64 << (nu + p) };
        if s.spatial().index().iter().any(|&m| m < 0 || m >= count) {
            return Err(Error::Unrepresentable("spatial cube outside the torus".into()));
        }
    }
    let finest = tree.tiles().iter().map(Tile::scale).max().unwrap_or(-p) + 2;
    let mut out = Vec::new();
    let mut stack = vec![DyadicCube::from_parts(dim, -p, [0, 0])];
    while let Some(q) = stack.pop() {
        let good = tree.tiles().iter().all(|s| !inside_tripled(s.spatial(), &q, p));
        if good {
            out.push(q);
        } else if q.scale() < finest {
            stack.extend(q.children_ordered());
        } else {
            return Err(Error::Unrepresentable("partition did not resolve".into()));
        }
    }
    out.sort();
    Ok(out)
}

/// Whether a dyadic cube is a member of `J_0(T)` (brute-force predicate used
/// for maximality audits).
pub fn in_j0(tree: &Tree, q: &DyadicCube, grid: &GridSpec) -> bool {
    tree.tiles().iter().all(|s| !inside_tripled(s.spatial(), q, grid.box_exponent()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1(nu: i32, m: i64, mf: i64) -> Tile {
        Tile::new(nu, &[m], &[mf]).unwrap()
    }

    #[test]
    fn lexicographic_order() {
        assert!(lex_less(&[0.0, 0.0], &[0.0, 1.0]));
        assert!(!lex_less(&[1.0, 0.0], &[0.0, 5.0]));
        assert!(!lex_less(&[0.3, 0.2], &[0.3, 0.2]));
    }

    #[test]
    fn children_in_lex_order() {
        let q = DyadicCube::new(1, 0, &[0]).unwrap();
        let ch = q.children_ordered();
        assert_eq!(ch[0].corner()[0], 0.0);
        assert_eq!(ch[1].corner()[0], 0.5);

        let q = DyadicCube::new(2, 0, &[0, 0]).unwrap();
        let centers: Vec<[f64; 2]> = q.children_ordered().iter().map(|c| c.center()).collect();
        assert_eq!(centers, vec![[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]);
        for w in centers.windows(2) {
            assert!(lex_less(&w[0], &w[1]));
        }

        let q = DyadicCube::new(1, -1, &[0]).unwrap();
        let ch = q.children_ordered();
        assert_eq!((ch[0].corner()[0], ch[0].side_length()), (0.0, 1.0));
        assert_eq!((ch[1].corner()[0], ch[1].side_length()), (1.0, 1.0));
    }

    #[test]
    fn center_and_side_are_exact() {
        let q = DyadicCube::new(2, 3, &[-3, 5]).unwrap();
        assert_eq!(q.center(), [-5.0 / 16.0, 11.0 / 16.0]);
        assert_eq!(q.side_length(), 0.125);
    }

    #[test]
    fn half_open_membership() {
        let q = DyadicCube::new(1, 1, &[1]).unwrap();
        assert!(q.contains_point(&[0.5]));
        assert!(!q.contains_point(&[1.0]));
        let c = q.closure();
        assert!(c.contains(&[1.0]));
    }

    #[test]
    fn tile_order_examples() {
        let u = t1(1, 0, 0);
        let v = t1(0, 0, 0);
        assert!(tile_le(&u, &u));
        assert!(tile_le(&u, &v));
        assert!(!tile_le(&v, &t1(0, 1, 0)));
    }

    #[test]
    fn i_tree_examples() {
        let t = t1(0, 0, 0);
        let s = t1(1, 0, 0);
        let single = Tree::new(t, vec![t]).unwrap();
        assert!(single.is_i_tree(1) && single.is_i_tree(2));
        let tree = Tree::new(t, vec![t, s]).unwrap();
        assert!(tree.is_i_tree(1));
        assert!(!tree.is_i_tree(2));
    }

    #[test]
    fn tree_rejects_tiles_above_top() {
        let t = t1(1, 0, 0);
        assert!(Tree::new(t, vec![t1(0, 0, 0)]).is_err());
    }

    #[test]
    fn tile_json_shape() {
        let t = Tile::new(2, &[1, 3], &[-1, 0]).unwrap();
        let js = serde_json::to_value(t).unwrap();
        assert_eq!(js, serde_json::json!({"nu": 2, "m": [1, 3], "m_freq": [-1, 0]}));
        let back: Tile = serde_json::from_value(js).unwrap();
        assert_eq!(back, t);
        let tree = Tree::new(t, vec![t]).unwrap();
        let js = serde_json::to_string(&tree).unwrap();
        assert!(js.starts_with("{\"top\":"));
        let back: Tree = serde_json::from_str(&js).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn partition_examples() {
        let grid = GridSpec::new(1, 2, 4).unwrap();
        let t = t1(0, 0, 0);
        let tree = Tree::new(t, vec![t]).unwrap();
        let j = partition_j(&tree, &grid).unwrap();
        let q = DyadicCube::new(1, 2, &[1]).unwrap();
        assert!(j.contains(&q));
        assert!(!j.contains(&DyadicCube::new(1, 1, &[0]).unwrap()));
        let total: f64 = j.iter().map(|c| c.volume()).sum();
        assert_eq!(total, 4.0);
    }

    #[test]
    fn tripled_cube_wraps_on_torus() {
        // [3,4) tripled is [2,5], which wraps over [0,1) on a torus of side 4.
        let i = DyadicCube::new(1, 0, &[0]).unwrap();
        let q = DyadicCube::new(1, 0, &[3]).unwrap();
        assert!(inside_tripled(&i, &q, 2));
        assert!(!inside_tripled(&i, &DyadicCube::new(1, 0, &[2]).unwrap(), 2));
    }
}
