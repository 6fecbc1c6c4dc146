//! Finite-generator iterated function systems and breadth-first orbit exploration.

pub mod cert;
pub mod construct;
pub mod experiments;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed::{find_fixed_point, FixedPointRecord};
use crate::map::SmoothMap;
use crate::space::{Factor, Region, StateSpace};

pub use cert::{
    analytic_bound, backward_itinerary, certify_density, compute_d, verify_covering, verify_well_distributed,
    well_distributed_points, CoveringCertificate, DensityWitness, WellDistributed,
};
pub use construct::{construct_translations, covering_constant, TranslationFamily};
pub use experiments::{minimality_experiment, recurrence_experiment, MinimalityReport, RecurrenceReport};

/// Symbols are 0-based generator indices; the first symbol is applied first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
#[serde(transparent)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "-");
        }
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

#[derive(Debug, Clone)]
pub struct Ifs {
    generators: Vec<SmoothMap>,
    region: Region,
    fixed_points: Option<Vec<FixedPointRecord>>,
    certificate: Option<CoveringCertificate>,
}

impl Ifs {
    pub fn new(generators: Vec<SmoothMap>, region: Region) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::Precondition("an IFS needs at least one generator".into()));
        }
        let space = generators[0].domain().clone();
        for g in &generators {
            if g.domain() != &space || g.codomain() != &space {
                return Err(Error::Precondition(format!("generator {} lives on a different space", g.name())));
            }
        }
        if region.dim() != space.dim() {
            return Err(Error::Precondition("region dimension does not match the space".into()));
        }
        Ok(Ifs { generators, region, fixed_points: None, certificate: None })
    }

    /// Affine contractions `y ↦ s y + c_i` on an interval space.
    pub fn affine_1d(space: StateSpace, region: Region, scale: f64, shifts: &[f64]) -> Result<Self> {
        let gens = shifts.iter().map(|c| SmoothMap::affine_1d(space.clone(), scale, *c)).collect();
        Ifs::new(gens, region)
    }

    pub fn generators(&self) -> &[SmoothMap] {
        &self.generators
    }

    pub fn generator(&self, i: usize) -> &SmoothMap {
        &self.generators[i]
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn space(&self) -> &StateSpace {
        self.generators[0].domain()
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn fixed_points(&self) -> Option<&[FixedPointRecord]> {
        self.fixed_points.as_deref()
    }

    pub fn fixed_point_coords(&self) -> Vec<Vec<f64>> {
        self.fixed_points
            .as_ref()
            .map(|f| f.iter().map(|r| r.point.clone()).collect())
            .unwrap_or_default()
    }

    pub fn certificate(&self) -> Option<&CoveringCertificate> {
        self.certificate.as_ref()
    }

    /// Solves for every generator's fixed point, starting from the region center.
    pub fn compute_fixed_points(&mut self, tol: f64) -> Result<&[FixedPointRecord]> {
        let guess = self.region.center();
        let recs = self
            .generators
            .iter()
            .map(|g| find_fixed_point(g, &guess, tol, 10_000))
            .collect::<Result<Vec<_>>>()?;
        self.fixed_points = Some(recs);
        Ok(self.fixed_points.as_deref().unwrap())
    }

    /// Runs [`verify_covering`] and caches the certificate for the density tools.
    pub fn certify(&mut self, grid_step: f64) -> Result<&CoveringCertificate> {
        let cert = verify_covering(self, &self.region, grid_step)?;
        self.certificate = Some(cert);
        Ok(self.certificate.as_ref().unwrap())
    }

    pub fn set_certificate(&mut self, cert: CoveringCertificate) {
        self.certificate = Some(cert);
    }

    /// Same generators with one replaced, dropping cached fixed points and certificate.
    pub fn with_generator(&self, i: usize, g: SmoothMap) -> Result<Ifs> {
        let mut gens = self.generators.clone();
        gens[i] = g;
        Ifs::new(gens, self.region.clone())
    }

    pub fn map_generators<F: FnMut(usize, &SmoothMap) -> SmoothMap>(&self, mut f: F) -> Result<Ifs> {
        let gens = self.generators.iter().enumerate().map(|(i, g)| f(i, g)).collect();
        Ifs::new(gens, self.region.clone())
    }

    pub fn apply_word(&self, word: &Word, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for &s in &word.0 {
            y = self.generators[s].apply(&y);
        }
        y
    }

    /// Applies inverse generators in word order: `g_{w_1}^{-1}` first.
    pub fn apply_inverse_word(&self, word: &Word, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = x.to_vec();
        for &s in &word.0 {
            y = self.inverse_of(s, &y)?;
        }
        Ok(y)
    }

    pub fn inverse_of(&self, i: usize, y: &[f64]) -> Result<Vec<f64>> {
        let g = &self.generators[i];
        match g.inverse() {
            Some(inv) => Ok(inv.apply(y)),
            None => g.preimage(y, y, 1e-14, 100),
        }
    }
}

/// Integer cell index of `x` at resolution `eps`, wrapping on circle factors.
pub fn cell_of(space: &StateSpace, x: &[f64], eps: f64) -> Vec<i64> {
    space
        .factors()
        .iter()
        .zip(x)
        .map(|(f, v)| match *f {
            Factor::Interval { .. } => (v / eps).floor() as i64,
            Factor::Circle { period } => {
                let n = (period / eps).round().max(1.0) as i64;
                ((f.reduce(*v) / eps).floor() as i64).rem_euclid(n)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachEntry {
    pub point: Vec<f64>,
    pub depth: usize,
    parent: Option<usize>,
    symbol: usize,
    #[serde(skip)]
    word: Option<Word>,
}

/// Occupancy grid of an orbit exploration; each cell stores the first point
/// that reached it and a parent link from which the witness word is rebuilt.
#[derive(Debug, Clone, Serialize)]
pub struct ReachSet {
    pub resolution: f64,
    pub seed: Vec<f64>,
    pub visited: usize,
    pub budget: usize,
    pub exhausted: bool,
    pub depth_reached: usize,
    entries: Vec<ReachEntry>,
    #[serde(skip)]
    index: BTreeMap<Vec<i64>, usize>,
    #[serde(skip)]
    frontier: Vec<usize>,
}

impl ReachSet {
    fn start(space: &StateSpace, seed: &[f64], eps: f64, budget: usize) -> Self {
        let seed = space.reduce(seed);
        let mut index = BTreeMap::new();
        index.insert(cell_of(space, &seed, eps), 0);
        ReachSet {
            resolution: eps,
            seed: seed.clone(),
            visited: 0,
            budget,
            exhausted: false,
            depth_reached: 0,
            entries: vec![ReachEntry { point: seed, depth: 0, parent: None, symbol: 0, word: None }],
            index,
            frontier: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.index.keys()
    }

    pub fn cell_set(&self) -> std::collections::BTreeSet<Vec<i64>> {
        self.index.keys().cloned().collect()
    }

    pub fn contains_cell(&self, cell: &[i64]) -> bool {
        self.index.contains_key(cell)
    }

    pub fn entry(&self, cell: &[i64]) -> Option<&ReachEntry> {
        self.index.get(cell).map(|&i| &self.entries[i])
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.iter().map(|e| e.point.as_slice())
    }

    /// Whether the frontier still holds unexpanded cells.
    pub fn is_open(&self) -> bool {
        !self.frontier.is_empty()
    }

    /// Occupancy grid of precomputed points with their words; the first point
    /// per cell wins.
    pub(crate) fn from_words<I>(space: &StateSpace, seed: &[f64], eps: f64, items: I) -> Self
    where
        I: IntoIterator<Item = (Vec<f64>, Word)>,
    {
        let mut rs = ReachSet {
            resolution: eps,
            seed: space.reduce(seed),
            visited: 0,
            budget: usize::MAX,
            exhausted: false,
            depth_reached: 0,
            entries: Vec::new(),
            index: BTreeMap::new(),
            frontier: Vec::new(),
        };
        for (y, w) in items {
            rs.visited += 1;
            if !y.iter().all(|v| v.is_finite()) || !space.contains(&y) {
                continue;
            }
            rs.depth_reached = rs.depth_reached.max(w.len());
            if let std::collections::btree_map::Entry::Vacant(v) = rs.index.entry(cell_of(space, &y, eps)) {
                v.insert(rs.entries.len());
                rs.entries.push(ReachEntry { point: y, depth: w.len(), parent: None, symbol: 0, word: Some(w) });
            }
        }
        rs
    }

    fn word_of(&self, mut i: usize) -> Word {
        if let Some(w) = &self.entries[i].word {
            return w.clone();
        }
        let mut w = Vec::new();
        while let Some(p) = self.entries[i].parent {
            w.push(self.entries[i].symbol);
            i = p;
        }
        w.reverse();
        Word(w)
    }

    pub fn witness(&self, cell: &[i64]) -> Option<Word> {
        self.index.get(cell).map(|&i| self.word_of(i))
    }

    /// Rows of (cell, representative, witness word) in cell order.
    pub fn rows(&self) -> Vec<(Vec<i64>, Vec<f64>, Word)> {
        self.index
            .iter()
            .map(|(c, &i)| (c.clone(), self.entries[i].point.clone(), self.word_of(i)))
            .collect()
    }

    /// Line-oriented dump: `cell<TAB>coords<TAB>word`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, p, w) in self.rows() {
            let cs: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            let ps: Vec<String> = p.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&format!("{}\t{}\t{}\n", cs.join(","), ps.join(","), w));
        }
        out
    }

    /// Checks that each stored point is in its cell and that replaying its
    /// word from the seed lands within half a cell of it.
    pub fn replay_check(&self, ifs: &Ifs) -> std::result::Result<(), Vec<i64>> {
        let space = ifs.space();
        for (cell, &i) in &self.index {
            let e = &self.entries[i];
            if &cell_of(space, &e.point, self.resolution) != cell {
                return Err(cell.clone());
            }
            let y = ifs.apply_word(&self.word_of(i), &self.seed);
            if space.distance(&y, &e.point) > 0.5 * self.resolution {
                return Err(cell.clone());
            }
        }
        Ok(())
    }
}

/// Breadth-first exploration of all words up to `depth`, keeping one point per
/// `eps`-cell and stopping after `budget` child visits.
pub fn forward_orbit(ifs: &Ifs, seed: &[f64], depth: usize, eps: f64, budget: usize) -> Result<ReachSet> {
    if eps <= 0.0 {
        return Err(Error::Precondition(format!("resolution must be positive, got {eps}")));
    }
    let seed = ifs.space().check(seed)?;
    let mut rs = ReachSet::start(ifs.space(), &seed, eps, budget);
    extend_orbit(ifs, &mut rs, depth);
    Ok(rs)
}

/// Continues a [`ReachSet`] from its stored frontier up to absolute `depth`.
pub fn extend_orbit(ifs: &Ifs, rs: &mut ReachSet, depth: usize) {
    let space = ifs.space();
    let k = ifs.len();
    while rs.depth_reached < depth && !rs.frontier.is_empty() && !rs.exhausted {
        let eps = rs.resolution;
        let children: Vec<(usize, usize, Vec<f64>, Vec<i64>)> = rs
            .frontier
            .par_iter()
            .flat_map_iter(|&pi| {
                let p = &rs.entries[pi].point;
                (0..k).map(move |s| {
                    let y = ifs.generator(s).apply(p);
                    let c = cell_of(space, &y, eps);
                    (pi, s, y, c)
                })
            })
            .collect();
        let mut next = Vec::new();
        let level = rs.depth_reached + 1;
        for (pi, s, y, c) in children {
            if rs.visited >= rs.budget {
                rs.exhausted = true;
                break;
            }
            rs.visited += 1;
            if !y.iter().all(|v| v.is_finite()) || !space.contains(&y) {
                continue;
            }
            if let std::collections::btree_map::Entry::Vacant(v) = rs.index.entry(c) {
                v.insert(rs.entries.len());
                next.push(rs.entries.len());
                rs.entries.push(ReachEntry { point: y, depth: level, parent: Some(pi), symbol: s, word: None });
            }
        }
        rs.frontier = next;
        rs.depth_reached = level;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyadic() -> Ifs {
        Ifs::affine_1d(StateSpace::cube(1, 0.0, 1.0), Region::interval(0.0, 1.0), 0.5, &[0.0, 0.5]).unwrap()
    }

    #[test]
    fn dyadic_depth_three() {
        let rs = forward_orbit(&dyadic(), &[0.0], 3, 1.0 / 16.0, 1000).unwrap();
        let mut pts: Vec<f64> = rs.points().map(|p| p[0]).collect();
        pts.sort_by(|a, b| a.total_cmp(b));
        let expect: Vec<f64> = (0..8).map(|k| k as f64 / 8.0).collect();
        assert_eq!(pts, expect);
        rs.replay_check(&dyadic()).unwrap();
    }

    #[test]
    fn identity_single_cell() {
        let ifs = Ifs::new(vec![SmoothMap::identity(StateSpace::cube(1, 0.0, 1.0))], Region::interval(0.0, 1.0)).unwrap();
        let rs = forward_orbit(&ifs, &[0.37], 20, 0.01, 1000).unwrap();
        assert_eq!(rs.len(), 1);
    }

    #[test]
    fn single_contraction_toward_zero() {
        let ifs = Ifs::affine_1d(StateSpace::cube(1, 0.0, 1.0), Region::interval(0.0, 1.0), 0.5, &[0.0]).unwrap();
        let rs = forward_orbit(&ifs, &[1.0], 10, 1e-3, 1000).unwrap();
        assert_eq!(rs.len(), 11);
    }

    #[test]
    fn budget_truncates() {
        let rs = forward_orbit(&dyadic(), &[0.0], 10, 1e-4, 5).unwrap();
        assert!(rs.exhausted);
        assert_eq!(rs.visited, 5);
    }

    #[test]
    fn circle_cells_wrap() {
        let s = StateSpace::torus(1);
        assert_eq!(cell_of(&s, &[0.999_999_999_999_999_9], 0.25), vec![3]);
        assert_eq!(cell_of(&s, &[1.0 - 1e-17], 0.25), vec![0]);
    }

    #[test]
    fn text_dump_has_one_line_per_cell() {
        let rs = forward_orbit(&dyadic(), &[0.0], 2, 1.0 / 16.0, 100).unwrap();
        assert_eq!(rs.to_text().lines().count(), rs.len());
    }
}
