//! Instance generation: a planar workspace with L-shaped obstacles, a random
//! roadmap grown through its free space, and field-of-view visibility from
//! each roadmap configuration to the points of interest.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CoverageMap, Edge, GipInstance, InstanceError};

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("could not place the {0} in free space after {MAX_PLACEMENT_ATTEMPTS} attempts")]
    PlacementFailure(&'static str),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(xa: f64, ya: f64, xb: f64, yb: f64) -> Self {
        Self {
            x0: xa.min(xb),
            y0: ya.min(yb),
            x1: xa.max(xb),
            y1: ya.max(yb),
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.x0..=self.x1).contains(&p[0]) && (self.y0..=self.y1).contains(&p[1])
    }

    fn clip_to(&self, outer: &Rect) -> Rect {
        Rect {
            x0: self.x0.max(outer.x0),
            y0: self.y0.max(outer.y0),
            x1: self.x1.min(outer.x1),
            y1: self.y1.min(outer.y1),
        }
    }

    /// Whether the closed segment `a`-`b` touches the rectangle
    /// (Liang-Barsky clipping).
    pub fn hits_segment(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        let d = [b[0] - a[0], b[1] - a[1]];
        let mut t0: f64 = 0.0;
        let mut t1: f64 = 1.0;
        let checks = [
            (-d[0], a[0] - self.x0),
            (d[0], self.x1 - a[0]),
            (-d[1], a[1] - self.y0),
            (d[1], self.y1 - a[1]),
        ];
        for (p, q) in checks {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Two axis-aligned rectangles sharing a corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LObstacle {
    pub arms: [Rect; 2],
}

impl LObstacle {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.arms.iter().any(|r| r.contains(p))
    }

    pub fn hits_segment(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        self.arms.iter().any(|r| r.hits_segment(a, b))
    }
}

/// Position and heading (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Config {
    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Smallest absolute difference between two angles, in `[0, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub bounds: Rect,
    pub obstacles: Vec<LObstacle>,
    pub pois: Vec<[f64; 2]>,
    pub start: Config,
}

impl Workspace {
    pub fn is_free(&self, p: [f64; 2]) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }

    pub fn segment_free(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        self.bounds.contains(a)
            && self.bounds.contains(b)
            && !self.obstacles.iter().any(|o| o.hits_segment(a, b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub fov_half_angle: f64,
    pub range: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            fov_half_angle: 60f64.to_radians(),
            range: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceParams {
    pub bounds: Rect,
    pub obstacle_count: usize,
    pub poi_count: usize,
    pub arm_length: (f64, f64),
    pub arm_width: (f64, f64),
}

impl Default for WorkspaceParams {
    fn default() -> Self {
        Self {
            bounds: Rect::new(0.0, 0.0, 100.0, 100.0),
            obstacle_count: 12,
            poi_count: 50,
            arm_length: (10.0, 25.0),
            arm_width: (2.0, 4.0),
        }
    }
}

fn sample_range<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn random_obstacle<R: Rng>(rng: &mut R, p: &WorkspaceParams) -> LObstacle {
    let b = p.bounds;
    let cx = rng.gen_range(b.x0..b.x1);
    let cy = rng.gen_range(b.y0..b.y1);
    let sx = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let sy = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let horizontal = sample_range(rng, p.arm_length);
    let vertical = sample_range(rng, p.arm_length);
    let width = sample_range(rng, p.arm_width);
    LObstacle {
        arms: [
            Rect::new(cx, cy, cx + sx * horizontal, cy + sy * width).clip_to(&b),
            Rect::new(cx, cy, cx + sx * width, cy + sy * vertical).clip_to(&b),
        ],
    }
}

fn sample_free<R: Rng>(
    rng: &mut R,
    ws: &Workspace,
    region: &Rect,
    what: &'static str,
) -> Result<[f64; 2], SimError> {
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let p = [
            rng.gen_range(region.x0..=region.x1),
            rng.gen_range(region.y0..=region.y1),
        ];
        if ws.is_free(p) {
            return Ok(p);
        }
    }
    Err(SimError::PlacementFailure(what))
}

/// Random workspace. The start lies in the top-left tenth of the bounds,
/// points of interest anywhere in free space.
pub fn generate_workspace(seed: u64, params: &WorkspaceParams) -> Result<Workspace, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = params.bounds;
    let mut ws = Workspace {
        bounds: b,
        obstacles: (0..params.obstacle_count)
            .map(|_| random_obstacle(&mut rng, params))
            .collect(),
        pois: Vec::with_capacity(params.poi_count),
        start: Config {
            x: b.x0,
            y: b.y1,
            theta: 0.0,
        },
    };
    let corner = Rect::new(b.x0, b.y1 - 0.1 * b.height(), b.x0 + 0.1 * b.width(), b.y1);
    let [x, y] = sample_free(&mut rng, &ws, &corner, "start configuration")?;
    ws.start = Config {
        x,
        y,
        theta: rng.gen_range(0.0..TAU),
    };
    for _ in 0..params.poi_count {
        let p = sample_free(&mut rng, &ws, &b, "point of interest")?;
        ws.pois.push(p);
    }
    Ok(ws)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrgParams {
    pub n: usize,
    pub step: f64,
    pub neighbor_radius: f64,
    /// Cost per radian of heading change.
    pub angle_weight: f64,
}

impl RrgParams {
    /// Step of a fiftieth of the diagonal, neighbors within 1.5 steps.
    pub fn for_workspace(ws: &Workspace, n: usize) -> Self {
        let step = ws.bounds.diagonal() / 50.0;
        Self {
            n,
            step,
            neighbor_radius: 1.5 * step,
            angle_weight: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roadmap {
    pub configs: Vec<Config>,
    /// Directed edges; every connection appears in both directions.
    pub edges: Vec<Edge>,
}

fn config_distance(a: &Config, b: &Config, angle_weight: f64) -> f64 {
    (a.x - b.x).hypot(a.y - b.y) + angle_weight * angle_diff(a.theta, b.theta)
}

/// Grows a roadmap from the start: each sample is steered from its nearest
/// vertex by at most `step`, then linked to every vertex within
/// `neighbor_radius` along a collision-free segment. Stops at `n` vertices or
/// when samples keep failing.
pub fn build_rrg(ws: &Workspace, params: &RrgParams, seed: u64) -> Roadmap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut configs = vec![ws.start];
    let mut edges = Vec::new();
    let b = ws.bounds;
    let max_attempts = 100 * params.n.max(1) + MAX_PLACEMENT_ATTEMPTS;
    let mut attempts = 0;
    while configs.len() < params.n && attempts < max_attempts {
        attempts += 1;
        let sample = Config {
            x: rng.gen_range(b.x0..=b.x1),
            y: rng.gen_range(b.y0..=b.y1),
            theta: rng.gen_range(0.0..TAU),
        };
        let (nearest, d) = configs
            .iter()
            .enumerate()
            .map(|(i, c)| (i, config_distance(c, &sample, params.angle_weight)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("roadmap has the start");
        if d <= 1e-12 {
            continue;
        }
        let from = configs[nearest];
        let t = (params.step / d).min(1.0);
        let mut turn = (sample.theta - from.theta).rem_euclid(TAU);
        if turn > PI {
            turn -= TAU;
        }
        let new = Config {
            x: from.x + t * (sample.x - from.x),
            y: from.y + t * (sample.y - from.y),
            theta: (from.theta + t * turn).rem_euclid(TAU),
        };
        if !ws.is_free(new.position()) || !ws.segment_free(from.position(), new.position()) {
            continue;
        }
        let id = configs.len();
        let mut neighbors: Vec<usize> = configs
            .iter()
            .enumerate()
            .filter(|(i, c)| {
                *i != nearest
                    && config_distance(c, &new, params.angle_weight) <= params.neighbor_radius
                    && ws.segment_free(c.position(), new.position())
            })
            .map(|(i, _)| i)
            .collect();
        neighbors.push(nearest);
        neighbors.sort_unstable();
        configs.push(new);
        for u in neighbors {
            let cost = config_distance(&configs[u], &new, params.angle_weight);
            if cost <= 0.0 {
                continue;
            }
            edges.push(Edge {
                tail: u,
                head: id,
                cost,
            });
            edges.push(Edge {
                tail: id,
                head: u,
                cost,
            });
        }
    }
    Roadmap { configs, edges }
}

/// Points of interest within range, inside the field of view and in line of
/// sight of `config`.
pub fn visibility(ws: &Workspace, sensor: &SensorModel, config: &Config) -> Vec<usize> {
    let from = config.position();
    ws.pois
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let (dx, dy) = (p[0] - from[0], p[1] - from[1]);
            let dist = dx.hypot(dy);
            if dist > sensor.range {
                return false;
            }
            if dist > 0.0 && angle_diff(dy.atan2(dx), config.theta) > sensor.fov_half_angle {
                return false;
            }
            !ws.obstacles.iter().any(|o| o.hits_segment(from, **p))
        })
        .map(|(i, _)| i)
        .collect()
}

/// Instance rooted at the start vertex whose groups are the vertices seeing
/// each point of interest.
pub fn emit_instance(
    ws: &Workspace,
    roadmap: &Roadmap,
    sensor: &SensorModel,
) -> Result<GipInstance, SimError> {
    let by_vertex = roadmap
        .configs
        .iter()
        .map(|c| visibility(ws, sensor, c))
        .collect();
    let coverage = CoverageMap::new(ws.pois.len(), by_vertex)?;
    Ok(GipInstance::with_coverage(
        roadmap.configs.len(),
        0,
        roadmap.edges.clone(),
        coverage,
    )?)
}

/// Geometry written next to a generated instance, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    pub bounds: Rect,
    pub obstacles: Vec<LObstacle>,
    pub pois: Vec<[f64; 2]>,
    pub start: Config,
    pub sensor: SensorModel,
    pub configs: Vec<Config>,
}

impl GeometryFile {
    pub fn new(ws: &Workspace, sensor: &SensorModel, roadmap: &Roadmap) -> Self {
        Self {
            bounds: ws.bounds,
            obstacles: ws.obstacles.clone(),
            pois: ws.pois.clone(),
            start: ws.start,
            sensor: *sensor,
            configs: roadmap.configs.clone(),
        }
    }
}

/// Everything needed to generate one simulated instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    pub n: usize,
    pub workspace: WorkspaceParams,
    pub sensor: SensorModel,
    /// Overrides the default step of a fiftieth of the diagonal.
    pub step: Option<f64>,
    pub seed: u64,
}

impl ScenarioParams {
    pub fn new(n: usize, poi_count: usize, seed: u64) -> Self {
        Self {
            n,
            workspace: WorkspaceParams {
                poi_count,
                ..WorkspaceParams::default()
            },
            sensor: SensorModel::default(),
            step: None,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub workspace: Workspace,
    pub roadmap: Roadmap,
    pub instance: GipInstance,
    pub geometry: GeometryFile,
}

/// Workspace, roadmap and instance from one seed. The roadmap uses a seed
/// derived from the workspace seed.
pub fn generate_scenario(params: &ScenarioParams) -> Result<Scenario, SimError> {
    let workspace = generate_workspace(params.seed, &params.workspace)?;
    let mut rrg = RrgParams::for_workspace(&workspace, params.n);
    if let Some(step) = params.step {
        rrg.step = step;
        rrg.neighbor_radius = 1.5 * step;
    }
    let roadmap = build_rrg(
        &workspace,
        &rrg,
        params.seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
    );
    let instance = emit_instance(&workspace, &roadmap, &params.sensor)?;
    let geometry = GeometryFile::new(&workspace, &params.sensor, &roadmap);
    Ok(Scenario {
        workspace,
        roadmap,
        instance,
        geometry,
    })
}

/// Small random digraph for cross-checking solvers: a Hamiltonian cycle keeps
/// it strongly connected, extra random edges are added up to `max_edges`,
/// and each group is a random nonempty vertex subset.
pub fn random_small_instance(
    seed: u64,
    vertices: (usize, usize),
    max_edges: usize,
    groups: (usize, usize),
) -> GipInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(vertices.0..=vertices.1);
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
    let mut pairs: Vec<(usize, usize)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    let mut others: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .filter(|&(u, v)| u != v && !pairs.contains(&(u, v)))
        .collect();
    rand::seq::SliceRandom::shuffle(&mut others[..], &mut rng);
    let extra = max_edges.saturating_sub(pairs.len()).min(others.len());
    let extra = rng.gen_range(0..=extra);
    pairs.extend(others.into_iter().take(extra));
    let edges = pairs
        .into_iter()
        .map(|(tail, head)| Edge {
            tail,
            head,
            // costs in (0, 10]
            cost: 10.0 - rng.gen_range(0.0..10.0),
        })
        .collect();
    let k = rng.gen_range(groups.0..=groups.1);
    let group_sets = (0..k)
        .map(|_| {
            let size = rng.gen_range(1..=2.min(n));
            rand::seq::index::sample(&mut rng, n, size).into_vec()
        })
        .collect();
    GipInstance::new(n, 0, edges, group_sets).expect("generated instance is valid")
}
