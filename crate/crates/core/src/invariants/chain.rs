use rayon::prelude::*;

use super::quadrature::UnitRule;
use super::InvariantError;
use crate::dynamics::{advect_bundles, IntegratorOptions, VortexDynamics};
use crate::expr::{parse_expression, Expr, Program, SpaceSpec};

/// Parameter step for finite-difference tangents of grid chains.
pub const STENCIL_STEP: f64 = 1e-5;

/// Tolerance of the matching-faces check for declared cycles.
pub const FACE_TOLERANCE: f64 = 1e-9;

const FACE_SAMPLES: usize = 10;

/// One quadrature node of a chain: the image point, the tangent vectors
/// (one per parameter axis) and the tensor weight. Points and tangents
/// live in extended coordinates `(t, x1..xn)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSample {
    pub param: Vec<f64>,
    pub weight: f64,
    pub point: Vec<f64>,
    pub tangents: Vec<Vec<f64>>,
}

/// A sampled grid node: the centre and, per axis, the points at `u -/+ h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridNode {
    pub param: Vec<f64>,
    pub weight: f64,
    pub center: Vec<f64>,
    pub stencil: Vec<(Vec<f64>, Vec<f64>)>,
}

impl GridNode {
    fn sample(&self, h: f64) -> NodeSample {
        NodeSample {
            param: self.param.clone(),
            weight: self.weight,
            point: self.center.clone(),
            tangents: self
                .stencil
                .iter()
                .map(|(lo, hi)| hi.iter().zip(lo).map(|(a, b)| (a - b) / (2.0 * h)).collect())
                .collect(),
        }
    }

    /// All points of the node, centre first, in the order used for bundles.
    fn points(&self) -> Vec<&Vec<f64>> {
        let mut pts = vec![&self.center];
        for (lo, hi) in &self.stencil {
            pts.push(lo);
            pts.push(hi);
        }
        pts
    }

    fn rebuilt(&self, mut pts: impl Iterator<Item = Vec<f64>>) -> GridNode {
        let center = pts.next().expect("centre point");
        let stencil = (0..self.stencil.len())
            .map(|_| (pts.next().expect("lower point"), pts.next().expect("upper point")))
            .collect();
        GridNode {
            param: self.param.clone(),
            weight: self.weight,
            center,
            stencil,
        }
    }
}

#[derive(Debug, Clone)]
enum ChainMap {
    Param {
        coords: Vec<Expr>,
        programs: Vec<Program>,
        /// `tangents[axis][coord]`
        tangents: Vec<Vec<Program>>,
    },
    Grid {
        order: usize,
        step: f64,
        nodes: Vec<GridNode>,
    },
}

/// A `k`-dimensional chain: a map `[0,1]^k -> R x M`, given symbolically or
/// as a sampled grid. Cycles are cubes whose opposite faces coincide.
#[derive(Debug, Clone)]
pub struct Chain {
    space: SpaceSpec,
    dim: usize,
    cycle: bool,
    map: ChainMap,
}

/// Parameter space `u1..uk` used by chain expressions.
pub fn parameter_space(dim: usize) -> Result<SpaceSpec, InvariantError> {
    SpaceSpec::numbered("u", dim).map_err(|e| InvariantError::Chain(e.to_string()))
}

impl Chain {
    /// Symbolic chain from `n + 1` coordinate expressions (time first) in
    /// the parameters `u1..u_dim`.
    pub fn parametric(
        space: &SpaceSpec,
        dim: usize,
        coords: Vec<Expr>,
        cycle: bool,
    ) -> Result<Self, InvariantError> {
        if dim == 0 {
            return Err(InvariantError::Chain("chain dimension must be positive".into()));
        }
        if coords.len() != space.extended_dim() {
            return Err(InvariantError::Chain(format!(
                "expected {} coordinate expressions, got {}",
                space.extended_dim(),
                coords.len()
            )));
        }
        if let Some(e) = coords
            .iter()
            .find(|e| e.max_var_index().is_some_and(|i| i > dim || i == 0))
        {
            return Err(InvariantError::Chain(format!(
                "coordinate `{e}` uses variables other than u1..u{dim}"
            )));
        }
        let programs = coords.iter().map(Expr::compile).collect();
        let tangents = (1..=dim)
            .map(|axis| coords.iter().map(|c| c.differentiate(axis).compile()).collect())
            .collect();
        let chain = Self {
            space: space.clone(),
            dim,
            cycle,
            map: ChainMap::Param {
                coords,
                programs,
                tangents,
            },
        };
        if cycle {
            chain.check_faces()?;
        }
        Ok(chain)
    }

    /// Chain in the slice `t = t0` from textual spatial coordinates.
    pub fn parse_spatial<S: AsRef<str>>(
        space: &SpaceSpec,
        dim: usize,
        coords: &[S],
        t0: f64,
        cycle: bool,
    ) -> Result<Self, InvariantError> {
        let params = parameter_space(dim)?;
        let mut exprs = vec![Expr::constant(t0)];
        for text in coords {
            exprs.push(parse_expression(text.as_ref(), &params)?);
        }
        Self::parametric(space, dim, exprs, cycle)
    }

    /// Circle of `radius` in the plane of spatial coordinates `(i, j)`
    /// (1-based), centred at `center`, in the slice `t = t0`.
    pub fn circle(
        space: &SpaceSpec,
        i: usize,
        j: usize,
        center: &[f64],
        radius: f64,
        t0: f64,
    ) -> Result<Self, InvariantError> {
        let n = space.n();
        if i == 0 || j == 0 || i > n || j > n || i == j || center.len() != n {
            return Err(InvariantError::Chain("invalid circle specification".into()));
        }
        let params = parameter_space(1)?;
        let angle = Expr::mul(Expr::constant(2.0 * std::f64::consts::PI), params.var_at(1));
        let mut exprs = vec![Expr::constant(t0)];
        for k in 1..=n {
            let c = Expr::constant(center[k - 1]);
            let e = if k == i {
                Expr::add(
                    c,
                    Expr::mul(
                        Expr::constant(radius),
                        Expr::call(crate::expr::Func::Cos, angle.clone()),
                    ),
                )
            } else if k == j {
                Expr::add(
                    c,
                    Expr::mul(
                        Expr::constant(radius),
                        Expr::call(crate::expr::Func::Sin, angle.clone()),
                    ),
                )
            } else {
                c
            };
            exprs.push(e);
        }
        Self::parametric(space, 1, exprs, true)
    }

    /// Grid chain assembled from already sampled nodes.
    pub fn from_grid(
        space: &SpaceSpec,
        dim: usize,
        order: usize,
        step: f64,
        nodes: Vec<GridNode>,
        cycle: bool,
    ) -> Result<Self, InvariantError> {
        let m = space.extended_dim();
        if dim == 0 || order == 0 || nodes.len() != order.pow(dim as u32) {
            return Err(InvariantError::Chain("grid does not match its order".into()));
        }
        for node in &nodes {
            let ok = node.center.len() == m
                && node.param.len() == dim
                && node.stencil.len() == dim
                && node.stencil.iter().all(|(a, b)| a.len() == m && b.len() == m);
            if !ok {
                return Err(InvariantError::Chain("grid node has the wrong shape".into()));
            }
        }
        Ok(Self {
            space: space.clone(),
            dim,
            cycle,
            map: ChainMap::Grid { order, step, nodes },
        })
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_cycle(&self) -> bool {
        self.cycle
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.map, ChainMap::Grid { .. })
    }

    /// Quadrature order baked into a grid chain.
    pub fn grid_order(&self) -> Option<usize> {
        match &self.map {
            ChainMap::Grid { order, .. } => Some(*order),
            ChainMap::Param { .. } => None,
        }
    }

    pub fn grid_nodes(&self) -> Option<&[GridNode]> {
        match &self.map {
            ChainMap::Grid { nodes, .. } => Some(nodes),
            ChainMap::Param { .. } => None,
        }
    }

    /// Coordinate expressions of a symbolic chain.
    pub fn coordinates(&self) -> Option<&[Expr]> {
        match &self.map {
            ChainMap::Param { coords, .. } => Some(coords),
            ChainMap::Grid { .. } => None,
        }
    }

    /// Image of the parameter point `u` (symbolic chains only).
    pub fn point_at(&self, u: &[f64]) -> Result<Vec<f64>, InvariantError> {
        match &self.map {
            ChainMap::Param { programs, .. } => eval_all(programs, u),
            ChainMap::Grid { .. } => Err(InvariantError::Chain(
                "grid chains are only defined at their nodes".into(),
            )),
        }
    }

    fn check_faces(&self) -> Result<(), InvariantError> {
        for axis in 0..self.dim {
            for s in 0..FACE_SAMPLES {
                let other = (s as f64 + 0.5) / FACE_SAMPLES as f64;
                let mut u = vec![other; self.dim];
                u[axis] = 0.0;
                let lo = self.point_at(&u)?;
                u[axis] = 1.0;
                let hi = self.point_at(&u)?;
                let residual = lo
                    .iter()
                    .zip(&hi)
                    .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
                    .fold(0.0f64, f64::max);
                if residual > FACE_TOLERANCE {
                    return Err(InvariantError::FaceMismatch {
                        axis: axis + 1,
                        residual,
                    });
                }
            }
        }
        Ok(())
    }

    /// Nodes, tangents and weights for a tensor Gauss rule of `order`.
    /// Symbolic chains use exact tangents; grid chains use central
    /// differences and must have been built with the same order.
    pub fn samples(&self, order: usize) -> Result<Vec<NodeSample>, InvariantError> {
        match &self.map {
            ChainMap::Param {
                programs, tangents, ..
            } => {
                let rule = UnitRule::new(order).ok_or(InvariantError::InvalidOrder)?;
                rule.tensor(self.dim)
                    .into_par_iter()
                    .map(|(u, weight)| {
                        Ok(NodeSample {
                            point: eval_all(programs, &u)?,
                            tangents: tangents
                                .iter()
                                .map(|row| eval_all(row, &u))
                                .collect::<Result<_, _>>()?,
                            param: u,
                            weight,
                        })
                    })
                    .collect()
            }
            ChainMap::Grid {
                order: grid_order,
                step,
                nodes,
            } => {
                if *grid_order != order {
                    return Err(InvariantError::QuadratureOrder {
                        expected: *grid_order,
                        found: order,
                    });
                }
                Ok(nodes.iter().map(|n| n.sample(*step)).collect())
            }
        }
    }

    /// Sample a symbolic chain into grid nodes with `STENCIL_STEP`; grid
    /// chains are returned unchanged when the order matches.
    pub fn to_grid(&self, order: usize) -> Result<Chain, InvariantError> {
        match &self.map {
            ChainMap::Grid { order: o, .. } => {
                if *o != order {
                    return Err(InvariantError::QuadratureOrder {
                        expected: *o,
                        found: order,
                    });
                }
                Ok(self.clone())
            }
            ChainMap::Param { programs, .. } => {
                let rule = UnitRule::new(order).ok_or(InvariantError::InvalidOrder)?;
                let h = STENCIL_STEP;
                let nodes = rule
                    .tensor(self.dim)
                    .into_par_iter()
                    .map(|(u, weight)| {
                        let center = eval_all(programs, &u)?;
                        let stencil = (0..self.dim)
                            .map(|axis| {
                                let mut lo = u.clone();
                                lo[axis] -= h;
                                let mut hi = u.clone();
                                hi[axis] += h;
                                Ok((eval_all(programs, &lo)?, eval_all(programs, &hi)?))
                            })
                            .collect::<Result<_, InvariantError>>()?;
                        Ok(GridNode {
                            param: u,
                            weight,
                            center,
                            stencil,
                        })
                    })
                    .collect::<Result<Vec<_>, InvariantError>>()?;
                Chain::from_grid(&self.space, self.dim, order, h, nodes, self.cycle)
            }
        }
    }
}

fn eval_all(programs: &[Program], u: &[f64]) -> Result<Vec<f64>, InvariantError> {
    let mut point = Vec::with_capacity(u.len() + 1);
    point.push(0.0);
    point.extend_from_slice(u);
    let mut stack = Vec::new();
    programs
        .iter()
        .map(|p| p.eval_with(&point, &mut stack).map_err(InvariantError::from))
        .collect()
}

fn time_tolerance(t0: f64) -> f64 {
    1e-12 * t0.abs().max(1.0)
}

/// Flow every grid point of `chain` (which must lie in the slice `t = t0`)
/// to `t1`. The result is a grid chain in the slice `t = t1`; nodes are
/// advected as independent shared-step bundles (centre plus stencil).
pub fn advect_chain(
    chain: &Chain,
    dynamics: &VortexDynamics,
    t0: f64,
    t1: f64,
    order: usize,
    opts: &IntegratorOptions,
) -> Result<Chain, InvariantError> {
    if chain.space().n() != dynamics.n() {
        return Err(InvariantError::SpaceMismatch);
    }
    let grid = chain.to_grid(order)?;
    let ChainMap::Grid { step, nodes, .. } = &grid.map else {
        unreachable!("to_grid returns a grid chain")
    };
    let tol = time_tolerance(t0);
    for node in nodes {
        if let Some(p) = node.points().into_iter().find(|p| (p[0] - t0).abs() > tol) {
            return Err(InvariantError::NotSpatialSlice { t0, found: p[0] });
        }
    }
    let bundles: Vec<Vec<Vec<f64>>> = nodes
        .iter()
        .map(|node| node.points().into_iter().map(|p| p[1..].to_vec()).collect())
        .collect();
    let flowed = advect_bundles(dynamics, &bundles, t0, t1, opts);
    let mut out = Vec::with_capacity(nodes.len());
    for (node, result) in nodes.iter().zip(flowed) {
        let pts = result.map_err(|source| InvariantError::Advection {
            param: node.param.clone(),
            source,
        })?;
        out.push(node.rebuilt(pts.into_iter().map(|x| {
            let mut p = Vec::with_capacity(x.len() + 1);
            p.push(t1);
            p.extend(x);
            p
        })));
    }
    Chain::from_grid(chain.space(), chain.dim(), order, *step, out, chain.is_cycle())
}

/// The 2-chain `(u, s) -> (t(s), phi_{t0 -> t(s)}(c(u)))` swept by the
/// solution curves through a spatial 1-chain `c` at `t0`, with
/// `t(s) = t0 + s (t1 - t0)`.
pub fn tube_chain(
    cycle: &Chain,
    dynamics: &VortexDynamics,
    t0: f64,
    t1: f64,
    order: usize,
    opts: &IntegratorOptions,
) -> Result<Chain, InvariantError> {
    if cycle.dim() != 1 {
        return Err(InvariantError::Chain("tube base must be one-dimensional".into()));
    }
    if cycle.space().n() != dynamics.n() {
        return Err(InvariantError::SpaceMismatch);
    }
    let base = cycle.to_grid(order)?;
    let ChainMap::Grid { step: h, nodes, .. } = &base.map else {
        unreachable!("to_grid returns a grid chain")
    };
    let h = *h;
    let rule = UnitRule::new(order).ok_or(InvariantError::InvalidOrder)?;
    let time = |s: f64| t0 + s * (t1 - t0);
    let mut sample_times = Vec::with_capacity(3 * order);
    for &s in rule.nodes() {
        sample_times.extend([time(s - h), time(s), time(s + h)]);
    }
    let tol = time_tolerance(t0);
    let tracks = nodes
        .par_iter()
        .map(|node| {
            let pts = node.points();
            if let Some(p) = pts.iter().find(|p| (p[0] - t0).abs() > tol) {
                return Err(InvariantError::NotSpatialSlice { t0, found: p[0] });
            }
            let bundle: Vec<Vec<f64>> = pts.iter().map(|p| p[1..].to_vec()).collect();
            let local = IntegratorOptions {
                sample_times: Some(sample_times.clone()),
                ..opts.clone()
            };
            let traj = crate::dynamics::integrate_bundle(dynamics, &bundle, t0, t1, &local);
            if let Some(source) = traj.failure {
                return Err(InvariantError::Advection {
                    param: node.param.clone(),
                    source,
                });
            }
            Ok(traj)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n = dynamics.n();
    let lookup =
        |traj: &crate::dynamics::Trajectory, t: f64, which: usize| -> Result<Vec<f64>, InvariantError> {
            let state = traj
                .state_at(t)
                .ok_or_else(|| InvariantError::Chain(format!("missing tube sample at t = {t}")))?;
            let mut p = Vec::with_capacity(n + 1);
            p.push(t);
            p.extend_from_slice(&state[which * n..(which + 1) * n]);
            Ok(p)
        };
    let mut grid = Vec::with_capacity(order * order);
    for (node, traj) in nodes.iter().zip(&tracks) {
        for (&s, &ws) in rule.nodes().iter().zip(rule.weights()) {
            let t = time(s);
            grid.push(GridNode {
                param: vec![node.param[0], s],
                weight: node.weight * ws,
                center: lookup(traj, t, 0)?,
                stencil: vec![
                    (lookup(traj, t, 1)?, lookup(traj, t, 2)?),
                    (lookup(traj, time(s - h), 0)?, lookup(traj, time(s + h), 0)?),
                ],
            });
        }
    }
    Chain::from_grid(cycle.space(), 2, order, h, grid, false)
}
