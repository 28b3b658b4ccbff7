//! Interior node lattices for intervals and masked rectangles.
//!
//! Nodes are centers of the cells of a uniform lattice with spacing `h`.
//! The domain used by the discrete energy is the union of the included
//! cells; everything else is exterior and carries the zero extension.

use std::fmt;
use std::sync::Arc;

use crate::energy::GridFunction;
use crate::error::{Error, Result};
use crate::kernel::Point;

/// Axis-aligned rectangle `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub lo: Point,
    pub hi: Point,
}

impl Rect {
    pub fn new(lo: Point, hi: Point) -> Self {
        Rect { lo, hi }
    }

    pub fn unit() -> Self {
        Rect { lo: [0.0, 0.0], hi: [1.0, 1.0] }
    }

    pub fn width(&self) -> f64 {
        self.hi[0] - self.lo[0]
    }

    pub fn height(&self) -> f64 {
        self.hi[1] - self.lo[1]
    }

    pub fn center(&self) -> Point {
        [0.5 * (self.lo[0] + self.hi[0]), 0.5 * (self.lo[1] + self.hi[1])]
    }
}

type MaskFn = dyn Fn(&Rect, &Point) -> bool + Send + Sync;

/// Inclusion predicate for cell centers of a 2D lattice.
#[derive(Clone)]
pub enum Mask {
    All,
    /// Disk inscribed in the bounding box.
    Disk,
    /// The box without its upper-right quadrant.
    LShape,
    Custom { name: String, f: Arc<MaskFn> },
}

impl Mask {
    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Rect, &Point) -> bool + Send + Sync + 'static,
    {
        Mask::Custom { name: name.into(), f: Arc::new(f) }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "all" => Some(Mask::All),
            "disk" => Some(Mask::Disk),
            "lshape" => Some(Mask::LShape),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Mask::All => "all",
            Mask::Disk => "disk",
            Mask::LShape => "lshape",
            Mask::Custom { name, .. } => name,
        }
    }

    pub fn contains(&self, rect: &Rect, x: &Point) -> bool {
        let c = rect.center();
        match self {
            Mask::All => true,
            Mask::Disk => {
                let rho = 0.5 * rect.width().min(rect.height());
                (x[0] - c[0]).hypot(x[1] - c[1]) < rho
            }
            Mask::LShape => !(x[0] > c[0] && x[1] > c[1]),
            Mask::Custom { f, .. } => f(rect, x),
        }
    }
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mask({})", self.name())
    }
}

#[derive(Clone, Debug)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Masked {
        rect: Rect,
        nx: usize,
        ny: usize,
        mask_name: String,
        /// Row-major `j * nx + i` inclusion table.
        inside: Vec<bool>,
    },
}

#[derive(Clone, Debug)]
pub struct Grid {
    n: usize,
    h: f64,
    nodes: Vec<Point>,
    /// Integer lattice coordinates of each node; `[i, 0]` in 1D.
    cells: Vec<[i64; 2]>,
    domain: Domain,
    symmetry: Option<Vec<usize>>,
}

/// Uniform cell-centered grid on `(a, b)` with `cells` nodes.
pub fn build_grid_1d(a: f64, b: f64, cells: usize) -> Result<Grid> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidGrid(format!("interval ({a}, {b}) is empty")));
    }
    // a single node is allowed: its energy reduces to t_0 |u_0|^p
    if cells == 0 {
        return Err(Error::InvalidGrid("node count must be positive".into()));
    }
    let h = (b - a) / cells as f64;
    let nodes = (0..cells).map(|i| [a + (i as f64 + 0.5) * h, 0.0]).collect();
    let lattice = (0..cells as i64).map(|i| [i, 0]).collect();
    let symmetry = Some((0..cells).map(|i| cells - 1 - i).collect());
    Ok(Grid { n: 1, h, nodes, cells: lattice, domain: Domain::Interval { a, b }, symmetry })
}

/// Lattice of spacing `h` over `rect`, keeping cells whose center satisfies `mask`.
pub fn build_grid_2d(rect: Rect, h: f64, mask: &Mask) -> Result<Grid> {
    let (w, ht) = (rect.width(), rect.height());
    if !(w > 0.0 && ht > 0.0) {
        return Err(Error::InvalidGrid("box must have positive area".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidGrid(format!("spacing h = {h} must be positive")));
    }
    let nx = integral_cells(w, h)?;
    let ny = integral_cells(ht, h)?;

    let mut inside = vec![false; nx * ny];
    let mut nodes = Vec::new();
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let x = [rect.lo[0] + (i as f64 + 0.5) * h, rect.lo[1] + (j as f64 + 0.5) * h];
            if mask.contains(&rect, &x) {
                inside[j * nx + i] = true;
                nodes.push(x);
                cells.push([i as i64, j as i64]);
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::InvalidGrid(format!("mask '{}' selects no cells", mask.name())));
    }

    let symmetric = (0..ny).all(|j| {
        (0..nx).all(|i| inside[j * nx + i] == inside[(ny - 1 - j) * nx + (nx - 1 - i)])
    });
    let symmetry = symmetric.then(|| {
        let mut index = vec![usize::MAX; nx * ny];
        for (k, c) in cells.iter().enumerate() {
            index[c[1] as usize * nx + c[0] as usize] = k;
        }
        cells
            .iter()
            .map(|c| index[(ny - 1 - c[1] as usize) * nx + (nx - 1 - c[0] as usize)])
            .collect()
    });

    Ok(Grid {
        n: 2,
        h,
        nodes,
        cells,
        domain: Domain::Masked { rect, nx, ny, mask_name: mask.name().to_string(), inside },
        symmetry,
    })
}

fn integral_cells(len: f64, h: f64) -> Result<usize> {
    let q = len / h;
    let k = q.round();
    if k < 1.0 || (q - k).abs() > 1e-9 * q.max(1.0) {
        return Err(Error::InvalidGrid(format!("h = {h} does not divide side length {len}")));
    }
    Ok(k as usize)
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Cell measure `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn lattice(&self) -> &[[i64; 2]] {
        &self.cells
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn symmetry_map(&self) -> Option<&[usize]> {
        self.symmetry.as_deref()
    }

    /// Orbits of the node set under every lattice symmetry of the domain
    /// (reflections of the interval; the subgroup of the square or
    /// rectangle symmetries that preserves the inclusion mask in 2D).
    /// Each orbit is sorted ascending; singletons are included.
    pub fn symmetry_orbits(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let perms: Vec<Vec<usize>> = match &self.domain {
            Domain::Interval { .. } => vec![(0..n).map(|i| n - 1 - i).collect()],
            Domain::Masked { nx, ny, inside, .. } => {
                let (nx, ny) = (*nx as i64, *ny as i64);
                let mut maps: Vec<LatticeMap> = vec![
                    |i, j, nx, _| (nx - 1 - i, j),
                    |i, j, _, ny| (i, ny - 1 - j),
                    |i, j, nx, ny| (nx - 1 - i, ny - 1 - j),
                ];
                if nx == ny {
                    maps.push(|i, j, _, _| (j, i));
                    maps.push(|i, j, nx, _| (nx - 1 - j, nx - 1 - i));
                    maps.push(|i, j, nx, _| (nx - 1 - j, i));
                    maps.push(|i, j, nx, _| (j, nx - 1 - i));
                }
                let mut index = vec![usize::MAX; inside.len()];
                for (k, c) in self.cells.iter().enumerate() {
                    index[(c[1] * nx + c[0]) as usize] = k;
                }
                maps.into_iter()
                    .filter_map(|f| {
                        let perm: Option<Vec<usize>> = self
                            .cells
                            .iter()
                            .map(|c| {
                                let (i, j) = f(c[0], c[1], nx, ny);
                                let k = index[(j * nx + i) as usize];
                                (k != usize::MAX).then_some(k)
                            })
                            .collect();
                        perm
                    })
                    .collect()
            }
        };
        let mut seen = vec![false; n];
        let mut orbits = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut orbit = vec![start];
            seen[start] = true;
            let mut k = 0;
            while k < orbit.len() {
                let i = orbit[k];
                for perm in &perms {
                    let j = perm[i];
                    if !seen[j] {
                        seen[j] = true;
                        orbit.push(j);
                    }
                }
                k += 1;
            }
            orbit.sort_unstable();
            orbits.push(orbit);
        }
        orbits
    }

    /// Measure of the discrete domain, `h^n` times the node count.
    pub fn measure(&self) -> f64 {
        self.cell_volume() * self.len() as f64
    }

    /// Whether lattice cell `(i, j)` belongs to the discrete domain.
    pub fn cell_inside(&self, i: i64, j: i64) -> bool {
        match &self.domain {
            Domain::Interval { .. } => j == 0 && i >= 0 && (i as usize) < self.nodes.len(),
            Domain::Masked { nx, ny, inside, .. } => {
                i >= 0
                    && j >= 0
                    && (i as usize) < *nx
                    && (j as usize) < *ny
                    && inside[j as usize * nx + i as usize]
            }
        }
    }

    /// Distance between nodes `i` and `j`, computed from integer lattice offsets.
    #[inline]
    pub fn node_distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.cells[i], self.cells[j]);
        let dx = (a[0] - b[0]) as f64;
        if self.n == 1 {
            dx.abs() * self.h
        } else {
            let dy = (a[1] - b[1]) as f64;
            dx.hypot(dy) * self.h
        }
    }

    /// Same grid shape with coordinates and spacing multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Grid> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("scale factor {c} must be positive")));
        }
        let domain = match &self.domain {
            Domain::Interval { a, b } => Domain::Interval { a: a * c, b: b * c },
            Domain::Masked { rect, nx, ny, mask_name, inside } => Domain::Masked {
                rect: Rect::new([rect.lo[0] * c, rect.lo[1] * c], [rect.hi[0] * c, rect.hi[1] * c]),
                nx: *nx,
                ny: *ny,
                mask_name: mask_name.clone(),
                inside: inside.clone(),
            },
        };
        let origin = match &domain {
            Domain::Interval { a, .. } => [*a, 0.0],
            Domain::Masked { rect, .. } => rect.lo,
        };
        let h = self.h * c;
        let nodes = self
            .cells
            .iter()
            .map(|cell| {
                let x = origin[0] + (cell[0] as f64 + 0.5) * h;
                let y = if self.n == 2 { origin[1] + (cell[1] as f64 + 0.5) * h } else { 0.0 };
                [x, y]
            })
            .collect();
        Ok(Grid {
            n: self.n,
            h,
            nodes,
            cells: self.cells.clone(),
            domain,
            symmetry: self.symmetry.clone(),
        })
    }

    /// Grid on a strictly larger domain at the same spacing: the interval
    /// extended by half its length on each side, or the box padded by
    /// `ceil(n/2)` cells on each side with every cell included.
    pub fn enlarged(&self) -> Result<Grid> {
        match &self.domain {
            Domain::Interval { a, b } => {
                let cells = self.len();
                let pad = cells.div_ceil(2);
                let ext = pad as f64 * self.h;
                build_grid_1d(a - ext, b + ext, cells + 2 * pad)
            }
            Domain::Masked { rect, nx, ny, .. } => {
                let (px, py) = (nx.div_ceil(2) as f64 * self.h, ny.div_ceil(2) as f64 * self.h);
                let big = Rect::new(
                    [rect.lo[0] - px, rect.lo[1] - py],
                    [rect.hi[0] + px, rect.hi[1] + py],
                );
                build_grid_2d(big, self.h, &Mask::All)
            }
        }
    }

    /// Short human-readable descriptor.
    pub fn describe(&self) -> String {
        match &self.domain {
            Domain::Interval { a, b } => format!("interval({a},{b}) N={}", self.len()),
            Domain::Masked { rect, mask_name, .. } => format!(
                "box([{},{}]x[{},{}]) h={} mask={} N={}",
                rect.lo[0], rect.hi[0], rect.lo[1], rect.hi[1], self.h, mask_name, self.len()
            ),
        }
    }
}

/// `(i, j, nx, ny) -> (i', j')` on cell indices.
type LatticeMap = fn(i64, i64, i64, i64) -> (i64, i64);

/// `v_i = u_{sigma(i)}` for the grid's reflection map.
pub fn reflect(grid: &Grid, u: &GridFunction) -> Result<GridFunction> {
    let sigma = grid.symmetry_map().ok_or(Error::MissingSymmetry)?;
    if u.len() != sigma.len() {
        return Err(Error::DimensionMismatch { expected: sigma.len(), got: u.len() });
    }
    let values = sigma.iter().map(|&k| u.values()[k]).collect();
    GridFunction::new(u.grid().clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_cell_centers() {
        let g = build_grid_1d(0.0, 1.0, 4).unwrap();
        assert_eq!(g.h(), 0.25);
        let xs: Vec<f64> = g.nodes().iter().map(|x| x[0]).collect();
        assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn symmetric_interval_map() {
        let g = build_grid_1d(-1.0, 1.0, 4).unwrap();
        assert_eq!(g.symmetry_map().unwrap(), &[3, 2, 1, 0]);
        for (i, &k) in g.symmetry_map().unwrap().iter().enumerate() {
            assert!((g.node(i)[0] + g.node(k)[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn interval_errors() {
        assert!(build_grid_1d(1.0, 0.0, 4).is_err());
        assert!(build_grid_1d(0.0, 0.0, 4).is_err());
        assert!(build_grid_1d(0.0, 1.0, 0).is_err());
        assert_eq!(build_grid_1d(0.0, 1.0, 1).unwrap().len(), 1);
    }

    #[test]
    fn square_two_by_two() {
        let g = build_grid_2d(Rect::unit(), 0.5, &Mask::All).unwrap();
        assert_eq!(g.len(), 4);
        let mut pts: Vec<Point> = g.nodes().to_vec();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]);
        assert!(g.symmetry_map().is_some());
    }

    #[test]
    fn single_cell_mask() {
        let m = Mask::custom("first", |_r: &Rect, x: &Point| x[0] < 0.5 && x[1] < 0.5);
        let g = build_grid_2d(Rect::unit(), 0.5, &m).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.symmetry_map().is_none());
    }

    #[test]
    fn non_integral_spacing_rejected() {
        assert!(matches!(build_grid_2d(Rect::unit(), 0.3, &Mask::All), Err(Error::InvalidGrid(_))));
        let none = Mask::custom("none", |_r: &Rect, _x: &Point| false);
        assert!(build_grid_2d(Rect::unit(), 0.25, &none).is_err());
    }

    #[test]
    fn twelfth_spacing_accepted() {
        let g = build_grid_2d(Rect::unit(), 1.0 / 12.0, &Mask::All).unwrap();
        assert_eq!(g.len(), 144);
    }

    #[test]
    fn builtin_masks_and_symmetry() {
        let disk = build_grid_2d(Rect::unit(), 0.125, &Mask::Disk).unwrap();
        assert!(disk.len() < 64 && disk.symmetry_map().is_some());
        let l = build_grid_2d(Rect::unit(), 0.125, &Mask::LShape).unwrap();
        assert_eq!(l.len(), 48);
        assert!(l.symmetry_map().is_none());
    }

    #[test]
    fn reflection_maps_coordinates() {
        let g = build_grid_2d(Rect::new([-1.0, -0.5], [1.0, 0.5]), 0.25, &Mask::Disk).unwrap();
        let sigma = g.symmetry_map().unwrap();
        for (i, &k) in sigma.iter().enumerate() {
            assert_eq!(sigma[k], i);
            assert!((g.node(i)[0] + g.node(k)[0]).abs() < 1e-14);
            assert!((g.node(i)[1] + g.node(k)[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn orbits() {
        let g = build_grid_1d(0.0, 1.0, 5).unwrap();
        assert_eq!(g.symmetry_orbits(), vec![vec![0, 4], vec![1, 3], vec![2]]);
        let sq = build_grid_2d(Rect::unit(), 0.25, &Mask::All).unwrap();
        let sizes: Vec<usize> = sq.symmetry_orbits().iter().map(|o| o.len()).collect();
        // corners, edge-adjacent pairs, and the 2x2 center block
        assert_eq!(sizes.iter().sum::<usize>(), 16);
        assert_eq!(sizes.len(), 3);
        let rect = build_grid_2d(Rect::new([0.0, 0.0], [2.0, 1.0]), 0.5, &Mask::All).unwrap();
        assert!(rect.symmetry_orbits().iter().all(|o| o.len() == 4));
        let l = build_grid_2d(Rect::unit(), 0.25, &Mask::LShape).unwrap();
        // only the diagonal reflection survives
        assert!(l.symmetry_orbits().iter().all(|o| o.len() <= 2));
        assert_eq!(l.symmetry_orbits().len(), 7);
    }

    #[test]
    fn reflect_function() {
        let g = Arc::new(build_grid_1d(-1.0, 1.0, 4).unwrap());
        let u = GridFunction::new(g.clone(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = reflect(&g, &u).unwrap();
        assert_eq!(v.values(), &[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(reflect(&g, &v).unwrap().values(), u.values());
        let sym = GridFunction::new(g.clone(), vec![1.0, 5.0, 5.0, 1.0]).unwrap();
        assert_eq!(reflect(&g, &sym).unwrap().values(), sym.values());

        let lg = Arc::new(build_grid_2d(Rect::unit(), 0.25, &Mask::LShape).unwrap());
        let w = GridFunction::constant(lg.clone(), 1.0);
        assert_eq!(reflect(&lg, &w).unwrap_err(), Error::MissingSymmetry);
    }

    #[test]
    fn enlarged_domains_contain_original() {
        let g = build_grid_1d(-1.0, 1.0, 32).unwrap();
        let big = g.enlarged().unwrap();
        assert_eq!(big.len(), 64);
        assert!((big.h() - g.h()).abs() < 1e-15);
        let g2 = build_grid_2d(Rect::unit(), 0.25, &Mask::Disk).unwrap();
        let big2 = g2.enlarged().unwrap();
        assert_eq!(big2.len(), 64);
    }

    #[test]
    fn scaled_grid() {
        let g = build_grid_1d(0.0, 1.0, 8).unwrap();
        let s = g.scaled(2.0).unwrap();
        assert_eq!(s.h(), 0.25);
        assert_eq!(s.node(0)[0], 0.125);
        assert_eq!(s.node_distance(0, 3), 2.0 * g.node_distance(0, 3));
    }
}
