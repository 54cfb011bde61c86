//! Built-in reference platform: a small seeded foraging simulator.
//!
//! Agents random-walk over a square arena, pick up an object when they
//! enter its cell, carry it back to the nest at the arena center and drop
//! it there. Collected objects respawn at a random cell so density stays
//! constant. The `noise` level scales the per-tick heading perturbation.
//!
//! Input schema:
//!
//! ```xml
//! <refsim>
//!   <agents count="8" velocity="1.0" noise="0.2"/>
//!   <arena side="16" objects="16"/>
//!   <time ticks="200"/>
//!   <seed value="42"/>
//! </refsim>
//! ```
//!
//! `arena@objects` defaults to the arena side. Other elements and
//! attributes are ignored.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, IoContext, Result};
use crate::fsutil;
use crate::xml::{Element, XmlTree};

pub const COLLECTED_STEM: &str = "collected";
pub const SPATIAL_STEM: &str = "spatial";
pub const SNAPSHOT_COUNT: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub population: u32,
    pub velocity: f64,
    pub noise: f64,
    pub grid_side: u32,
    pub objects: u32,
    pub duration_ticks: u64,
    pub seed: u64,
}

fn required<'a>(tree: &'a XmlTree, elem: &str) -> Result<&'a Element> {
    tree.root
        .child(elem)
        .ok_or_else(|| Error::Sim(format!("missing <{elem}> element")))
}

fn attr<T: std::str::FromStr>(elem: &Element, name: &str) -> Result<T> {
    let raw = elem
        .attr(name)
        .ok_or_else(|| Error::Sim(format!("missing attribute {}@{name}", elem.name)))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::Sim(format!("bad value '{raw}' for {}@{name}", elem.name)))
}

impl SimConfig {
    pub fn from_xml(tree: &XmlTree) -> Result<Self> {
        if tree.root.name != "refsim" {
            return Err(Error::Sim(format!(
                "root element must be <refsim>, found <{}>",
                tree.root.name
            )));
        }
        let agents = required(tree, "agents")?;
        let arena = required(tree, "arena")?;
        let cfg = SimConfig {
            population: attr(agents, "count")?,
            velocity: attr(agents, "velocity")?,
            noise: attr(agents, "noise")?,
            grid_side: attr(arena, "side")?,
            objects: match arena.attr("objects") {
                Some(_) => attr(arena, "objects")?,
                None => attr(arena, "side")?,
            },
            duration_ticks: attr(required(tree, "time")?, "ticks")?,
            seed: attr(required(tree, "seed")?, "value")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Sim(m.to_string()));
        if self.population == 0 {
            return fail("agents@count must be a positive integer");
        }
        if !(self.velocity.is_finite() && self.velocity > 0.0) {
            return fail("agents@velocity must be positive");
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return fail("agents@noise must lie in [0, 1]");
        }
        if self.grid_side < 2 {
            return fail("arena@side must be at least 2");
        }
        if self.duration_ticks == 0 {
            return fail("time@ticks must be positive");
        }
        Ok(())
    }

    /// Ticks between spatial snapshots.
    pub fn snapshot_interval(&self) -> u64 {
        (self.duration_ticks / SNAPSHOT_COUNT).max(1)
    }
}

struct Agent {
    x: f64,
    y: f64,
    heading: f64,
    carrying: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Cumulative objects delivered after each tick, ticks 1..=duration.
    pub collected: Vec<u64>,
    /// Agent occupancy counts, `[k][row][col]`.
    pub snapshots: Vec<Vec<Vec<u32>>>,
}

pub fn simulate(cfg: &SimConfig) -> SimOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let side = cfg.grid_side as f64;
    let nest = (side / 2.0, side / 2.0);
    let n_cells = (cfg.grid_side * cfg.grid_side) as usize;
    let cell_of = |x: f64, y: f64| -> usize {
        let cx = (x.floor() as i64).clamp(0, cfg.grid_side as i64 - 1) as usize;
        let cy = (y.floor() as i64).clamp(0, cfg.grid_side as i64 - 1) as usize;
        cy * cfg.grid_side as usize + cx
    };
    let nest_cell = cell_of(nest.0, nest.1);

    let mut objects = vec![0u32; n_cells];
    let place_object = |objects: &mut Vec<u32>, rng: &mut ChaCha8Rng| loop {
        let c = rng.random_range(0..n_cells);
        if c != nest_cell {
            objects[c] += 1;
            break;
        }
    };
    for _ in 0..cfg.objects {
        place_object(&mut objects, &mut rng);
    }

    let mut agents: Vec<Agent> = (0..cfg.population)
        .map(|_| Agent {
            x: nest.0 + rng.random_range(-0.5..0.5),
            y: nest.1 + rng.random_range(-0.5..0.5),
            heading: rng.random_range(-PI..PI),
            carrying: false,
        })
        .collect();

    let interval = cfg.snapshot_interval();
    let mut collected = 0u64;
    let mut series = Vec::with_capacity(cfg.duration_ticks as usize);
    let mut snapshots = Vec::new();

    for tick in 1..=cfg.duration_ticks {
        for agent in agents.iter_mut() {
            let jitter = cfg.noise * rng.random_range(-PI..PI);
            if agent.carrying {
                agent.heading = (nest.1 - agent.y).atan2(nest.0 - agent.x) + 0.5 * jitter;
            } else {
                agent.heading += jitter;
            }
            agent.x += cfg.velocity * agent.heading.cos();
            agent.y += cfg.velocity * agent.heading.sin();
            // reflect off the walls
            if agent.x < 0.0 || agent.x >= side {
                agent.x = agent.x.clamp(0.0, side - 1e-9);
                agent.heading = PI - agent.heading;
            }
            if agent.y < 0.0 || agent.y >= side {
                agent.y = agent.y.clamp(0.0, side - 1e-9);
                agent.heading = -agent.heading;
            }

            if agent.carrying {
                let d = ((agent.x - nest.0).powi(2) + (agent.y - nest.1).powi(2)).sqrt();
                if d <= 1.0 {
                    agent.carrying = false;
                    collected += 1;
                    agent.heading = rng.random_range(-PI..PI);
                }
            } else {
                let c = cell_of(agent.x, agent.y);
                if objects[c] > 0 {
                    objects[c] -= 1;
                    agent.carrying = true;
                    place_object(&mut objects, &mut rng);
                }
            }
        }
        series.push(collected);

        if tick % interval == 0 && (snapshots.len() as u64) < SNAPSHOT_COUNT {
            let mut grid = vec![vec![0u32; cfg.grid_side as usize]; cfg.grid_side as usize];
            for a in &agents {
                let c = cell_of(a.x, a.y);
                grid[c / cfg.grid_side as usize][c % cfg.grid_side as usize] += 1;
            }
            snapshots.push(grid);
        }
    }

    SimOutput {
        collected: series,
        snapshots,
    }
}

impl SimOutput {
    pub fn collected_csv(&self) -> String {
        let mut s = String::from("t,collected\n");
        for (i, c) in self.collected.iter().enumerate() {
            let _ = writeln!(s, "{},{c}", i + 1);
        }
        s
    }

    pub fn snapshot_csv(&self, k: usize) -> String {
        let grid = &self.snapshots[k];
        let cols = grid.first().map_or(0, |r| r.len());
        let header: Vec<String> = (0..cols).map(|c| format!("c{c}")).collect();
        let mut s = header.join(",");
        s.push('\n');
        for row in grid {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).at(dir)?;
        fsutil::write_atomic(&dir.join(format!("{COLLECTED_STEM}.csv")), self.collected_csv())?;
        for k in 0..self.snapshots.len() {
            fsutil::write_atomic(
                &dir.join(format!("{SPATIAL_STEM}.{k}.csv")),
                self.snapshot_csv(k),
            )?;
        }
        Ok(())
    }
}

/// Entry point of the `refsim` binary. `expected_seed`, when given, must
/// match the seed in the input file.
pub fn run_refsim(input: &Path, out_dir: &Path, expected_seed: Option<u64>) -> Result<SimOutput> {
    let tree = XmlTree::load(input)?;
    let cfg = SimConfig::from_xml(&tree)?;
    if let Some(seed) = expected_seed {
        if seed != cfg.seed {
            return Err(Error::Sim(format!(
                "--seed {seed} does not match seed {} in {}",
                cfg.seed,
                input.display()
            )));
        }
    }
    let out = simulate(&cfg);
    out.write(out_dir)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(population: u32, noise: f64, seed: u64) -> SimConfig {
        SimConfig {
            population,
            velocity: 1.0,
            noise,
            grid_side: 12,
            objects: 12,
            duration_ticks: 100,
            seed,
        }
    }

    const INPUT: &str = r#"<refsim>
  <agents count="3" velocity="1.0" noise="0.5"/>
  <arena side="8"/>
  <time ticks="50"/>
  <seed value="9"/>
</refsim>
"#;

    #[test]
    fn parses_input() {
        let c = SimConfig::from_xml(&XmlTree::parse(INPUT).unwrap()).unwrap();
        assert_eq!(c.population, 3);
        assert_eq!(c.objects, 8);
        assert_eq!(c.duration_ticks, 50);
        assert_eq!(c.snapshot_interval(), 5);
    }

    #[test]
    fn rejects_zero_population_and_missing_fields() {
        let zero = INPUT.replace("count=\"3\"", "count=\"0\"");
        assert!(SimConfig::from_xml(&XmlTree::parse(&zero).unwrap()).is_err());
        let no_seed = INPUT.replace("<seed value=\"9\"/>", "");
        let err = SimConfig::from_xml(&XmlTree::parse(&no_seed).unwrap()).unwrap_err();
        assert!(err.to_string().contains("seed"));
        let noisy = INPUT.replace("noise=\"0.5\"", "noise=\"1.5\"");
        assert!(SimConfig::from_xml(&XmlTree::parse(&noisy).unwrap()).is_err());
    }

    #[test]
    fn deterministic_outputs() {
        let c = cfg(4, 0.3, 11);
        let a = simulate(&c);
        let b = simulate(&c);
        assert_eq!(a, b);
        assert_eq!(a.collected.len(), 100);
        assert_eq!(a.snapshots.len(), 10);
        let total: u32 = a.snapshots[0].iter().flatten().sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn writes_files() {
        let tmp = tempfile::tempdir().unwrap();
        let input = tmp.path().join("input.xml");
        fs::write(&input, INPUT).unwrap();
        let out = tmp.path().join("output");
        run_refsim(&input, &out, Some(9)).unwrap();
        let csv = fs::read_to_string(out.join("collected.csv")).unwrap();
        assert!(csv.starts_with("t,collected\n1,"));
        assert_eq!(csv.lines().count(), 51);
        assert!(out.join("spatial.9.csv").exists());
        assert!(run_refsim(&input, &out, Some(10)).is_err());
    }

    #[test]
    fn mean_final_collected_grows_with_population() {
        let mean_final = |pop: u32| -> f64 {
            let total: u64 = (0..20)
                .map(|s| *simulate(&cfg(pop, 0.3, 1000 + s)).collected.last().unwrap())
                .sum();
            total as f64 / 20.0
        };
        let means: Vec<f64> = [1, 2, 4, 8].iter().map(|&p| mean_final(p)).collect();
        assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn collected_is_monotone(pop in 1u32..12, noise in 0.0f64..=1.0, vel in 0.2f64..3.0, seed: u64) {
            let mut c = cfg(pop, noise, seed);
            c.velocity = vel;
            c.duration_ticks = 60;
            let out = simulate(&c);
            prop_assert!(out.collected.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
