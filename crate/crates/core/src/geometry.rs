//! Two-cell drop geometry and large-scale link gains.
//!
//! The interfered (uplink) BS sits at the origin and the interfering
//! (downlink) BS at `(separation, 0)`. Path loss follows the 3GPP UMi
//! street-canyon NLOS form; shadowing is i.i.d. log-normal per link.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed;

/// Coverage radius of a cell as a multiple of its nominal radius, used by the
/// dual-connectivity predicate.
pub const COVERAGE_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    InterferedBs,
    InterferingBs,
    UlUt,
    DlUt,
    DedicatedTerminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub index: usize,
    pub kind: NodeKind,
    pub position: Point,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGain {
    pub path_loss_db: f64,
    pub shadow_db: f64,
    pub total_gain_linear: f64,
}

impl LinkGain {
    pub fn new(path_loss_db: f64, shadow_db: f64) -> Self {
        Self {
            path_loss_db,
            shadow_db,
            total_gain_linear: 10f64.powf(-(path_loss_db + shadow_db) / 10.0),
        }
    }

    pub fn total_loss_db(&self) -> f64 {
        self.path_loss_db + self.shadow_db
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ForwardingStrategy {
    /// Dually-connected interfered-cell UT closest to the interfering BS.
    NearestToInterferingBs,
    /// Dually-connected interfered-cell UT closest to the interfered BS.
    NearestToInterferedBs,
    /// Pre-placed terminal at the midpoint of the BS-BS segment.
    DedicatedMidpoint,
}

impl ForwardingStrategy {
    pub const ALL: [ForwardingStrategy; 3] = [
        ForwardingStrategy::NearestToInterferingBs,
        ForwardingStrategy::NearestToInterferedBs,
        ForwardingStrategy::DedicatedMidpoint,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ForwardingStrategy::NearestToInterferingBs => "nearest_interfering",
            ForwardingStrategy::NearestToInterferedBs => "nearest_interfered",
            ForwardingStrategy::DedicatedMidpoint => "dedicated_midpoint",
        }
    }
}

impl fmt::Display for ForwardingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ForwardingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "nearest_interfering" | "nearest_to_interfering_bs" => Ok(Self::NearestToInterferingBs),
            "nearest_interfered" | "nearest_to_interfered_bs" => Ok(Self::NearestToInterferedBs),
            "dedicated_midpoint" | "dedicated" => Ok(Self::DedicatedMidpoint),
            other => Err(Error::InvalidConfig(format!(
                "unknown forwarding strategy '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub cell_radius_m: f64,
    pub bs_separation_m: f64,
    pub ul_uts: usize,
    pub dl_uts: usize,
    pub bs_power_dbm: f64,
    pub ut_power_dbm: f64,
    pub dedicated_power_dbm: f64,
    pub place_dedicated: bool,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            cell_radius_m: 100.0,
            bs_separation_m: 150.0,
            ul_uts: 4,
            dl_uts: 4,
            bs_power_dbm: 33.0,
            ut_power_dbm: 20.0,
            dedicated_power_dbm: 20.0,
            place_dedicated: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub nodes: Vec<Node>,
    pub cell_radius_m: f64,
    pub bs_separation_m: f64,
}

impl Layout {
    pub fn interfered_bs(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn interfering_bs(&self) -> &Node {
        &self.nodes[1]
    }

    pub fn of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    pub fn ul_uts(&self) -> impl Iterator<Item = &Node> {
        self.of_kind(NodeKind::UlUt)
    }

    pub fn dl_uts(&self) -> impl Iterator<Item = &Node> {
        self.of_kind(NodeKind::DlUt)
    }

    pub fn dedicated(&self) -> Option<&Node> {
        self.of_kind(NodeKind::DedicatedTerminal).next()
    }

    pub fn coverage_radius_m(&self) -> f64 {
        self.cell_radius_m * COVERAGE_FACTOR
    }

    /// A terminal is dually connected when it lies within the coverage radius
    /// of both base stations.
    pub fn is_dually_connected(&self, node: &Node) -> bool {
        let reach = self.coverage_radius_m();
        node.position.distance(&self.interfered_bs().position) <= reach
            && node.position.distance(&self.interfering_bs().position) <= reach
    }
}

fn uniform_in_disc<R: Rng + ?Sized>(rng: &mut R, center: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// Places both BSs, the UTs of each cell, and optionally the dedicated
/// forwarding terminal. Pure function of `(config, seed)`.
pub fn drop_scenario(config: &GeometryConfig, seed: u64) -> Result<Layout> {
    if !(config.cell_radius_m > 0.0) || !(config.bs_separation_m > 0.0) {
        return Err(Error::InvalidConfig(
            "cell radius and BS separation must be positive".into(),
        ));
    }
    if config.ul_uts == 0 || config.dl_uts == 0 {
        return Err(Error::InvalidConfig(
            "each cell needs at least one UT".into(),
        ));
    }
    for p in [
        config.bs_power_dbm,
        config.ut_power_dbm,
        config.dedicated_power_dbm,
    ] {
        if !p.is_finite() {
            return Err(Error::InvalidConfig(
                "transmit powers must be finite".into(),
            ));
        }
    }

    let mut rng = seed::rng(seed);
    let origin = Point::new(0.0, 0.0);
    let far = Point::new(config.bs_separation_m, 0.0);
    let mut nodes = Vec::with_capacity(3 + config.ul_uts + config.dl_uts);
    let mut push = |kind, position, tx_power_dbm| {
        let index = nodes.len();
        nodes.push(Node {
            index,
            kind,
            position,
            tx_power_dbm,
        });
    };

    push(NodeKind::InterferedBs, origin, config.bs_power_dbm);
    push(NodeKind::InterferingBs, far, config.bs_power_dbm);
    for _ in 0..config.ul_uts {
        push(
            NodeKind::UlUt,
            uniform_in_disc(&mut rng, origin, config.cell_radius_m),
            config.ut_power_dbm,
        );
    }
    for _ in 0..config.dl_uts {
        push(
            NodeKind::DlUt,
            uniform_in_disc(&mut rng, far, config.cell_radius_m),
            config.ut_power_dbm,
        );
    }
    if config.place_dedicated {
        push(
            NodeKind::DedicatedTerminal,
            Point::new(0.5 * config.bs_separation_m, 0.0),
            config.dedicated_power_dbm,
        );
    }

    Ok(Layout {
        nodes,
        cell_radius_m: config.cell_radius_m,
        bs_separation_m: config.bs_separation_m,
    })
}

/// UMi street-canyon NLOS path loss in dB; distances below 1 m clamp to 1 m.
pub fn path_loss_db(distance_m: f64, carrier_ghz: f64) -> f64 {
    22.4 + 35.3 * distance_m.max(1.0).log10() + 21.3 * carrier_ghz.log10()
}

pub fn link_gain<R: Rng + ?Sized>(
    a: &Node,
    b: &Node,
    carrier_ghz: f64,
    shadow_std_db: f64,
    rng: &mut R,
) -> LinkGain {
    let pl = path_loss_db(a.position.distance(&b.position), carrier_ghz);
    let shadow = if shadow_std_db > 0.0 {
        Normal::new(0.0, shadow_std_db)
            .expect("finite shadowing std")
            .sample(rng)
    } else {
        0.0
    };
    LinkGain::new(pl, shadow)
}

/// Picks the forwarding terminal for `strategy`. Among equidistant UT
/// candidates the lowest node index wins.
pub fn select_forwarding_terminal(layout: &Layout, strategy: ForwardingStrategy) -> Result<&Node> {
    let anchor = match strategy {
        ForwardingStrategy::DedicatedMidpoint => {
            return layout
                .dedicated()
                .ok_or_else(|| Error::Selection("no dedicated terminal placed".into()));
        }
        ForwardingStrategy::NearestToInterferingBs => layout.interfering_bs().position,
        ForwardingStrategy::NearestToInterferedBs => layout.interfered_bs().position,
    };
    layout
        .ul_uts()
        .filter(|n| layout.is_dually_connected(n))
        .fold(None::<(&Node, f64)>, |best, n| {
            let d = n.position.distance(&anchor);
            match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((n, d)),
            }
        })
        .map(|(n, _)| n)
        .ok_or_else(|| Error::Selection(format!("no dually-connected UT for {strategy}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout_with_uts(positions: &[Point]) -> Layout {
        let mut nodes = vec![
            Node {
                index: 0,
                kind: NodeKind::InterferedBs,
                position: Point::new(0.0, 0.0),
                tx_power_dbm: 33.0,
            },
            Node {
                index: 1,
                kind: NodeKind::InterferingBs,
                position: Point::new(150.0, 0.0),
                tx_power_dbm: 33.0,
            },
        ];
        for &p in positions {
            nodes.push(Node {
                index: nodes.len(),
                kind: NodeKind::UlUt,
                position: p,
                tx_power_dbm: 20.0,
            });
        }
        Layout {
            nodes,
            cell_radius_m: 100.0,
            bs_separation_m: 150.0,
        }
    }

    #[test]
    fn interfering_bs_at_separation() {
        let layout = drop_scenario(&GeometryConfig::default(), 1).unwrap();
        assert_eq!(layout.interfered_bs().position, Point::new(0.0, 0.0));
        assert_eq!(layout.interfering_bs().position, Point::new(150.0, 0.0));
        assert_eq!(layout.dedicated().unwrap().position, Point::new(75.0, 0.0));
    }

    #[test]
    fn zero_uts_rejected() {
        let cfg = GeometryConfig {
            ul_uts: 0,
            ..GeometryConfig::default()
        };
        assert!(matches!(
            drop_scenario(&cfg, 1),
            Err(Error::InvalidConfig(_))
        ));
        let cfg = GeometryConfig {
            dl_uts: 0,
            ..GeometryConfig::default()
        };
        assert!(matches!(
            drop_scenario(&cfg, 1),
            Err(Error::InvalidConfig(_))
        ));
        let cfg = GeometryConfig {
            cell_radius_m: 0.0,
            ..GeometryConfig::default()
        };
        assert!(drop_scenario(&cfg, 1).is_err());
    }

    #[test]
    fn layout_is_deterministic_and_uts_inside_cells() {
        let cfg = GeometryConfig::default();
        let a = drop_scenario(&cfg, 42).unwrap();
        assert_eq!(a, drop_scenario(&cfg, 42).unwrap());
        assert_ne!(a, drop_scenario(&cfg, 43).unwrap());
        for n in a.ul_uts() {
            assert!(n.position.distance(&a.interfered_bs().position) <= 100.0);
        }
        for n in a.dl_uts() {
            assert!(n.position.distance(&a.interfering_bs().position) <= 100.0);
        }
    }

    #[test]
    fn path_loss_reference_values() {
        // 22.4 + 35.3 log10(10) + 21.3 log10(3)
        assert!((path_loss_db(10.0, 3.0) - 67.862_683).abs() < 1e-4);
        assert!((path_loss_db(1.0, 3.0) - 32.562_683).abs() < 1e-4);
        assert_eq!(path_loss_db(0.2, 3.0), path_loss_db(1.0, 3.0));
        assert!(path_loss_db(120.0, 3.0) > path_loss_db(80.0, 3.0));
    }

    #[test]
    fn nearest_candidate_and_tie_break() {
        // 30/60/90 m from the interfering BS, listed out of order.
        let layout = layout_with_uts(&[
            Point::new(90.0, 0.0),
            Point::new(120.0, 0.0),
            Point::new(60.0, 0.0),
        ]);
        let t = select_forwarding_terminal(&layout, ForwardingStrategy::NearestToInterferingBs)
            .unwrap();
        assert_eq!(t.position, Point::new(120.0, 0.0));
        let t =
            select_forwarding_terminal(&layout, ForwardingStrategy::NearestToInterferedBs).unwrap();
        assert_eq!(t.position, Point::new(60.0, 0.0));

        let tied = layout_with_uts(&[Point::new(50.0, 50.0), Point::new(50.0, -50.0)]);
        let t =
            select_forwarding_terminal(&tied, ForwardingStrategy::NearestToInterferingBs).unwrap();
        assert_eq!(t.index, 2);
    }

    #[test]
    fn selection_errors() {
        let layout = layout_with_uts(&[Point::new(-90.0, 0.0)]);
        assert!(matches!(
            select_forwarding_terminal(&layout, ForwardingStrategy::NearestToInterferingBs),
            Err(Error::Selection(_))
        ));
        assert!(matches!(
            select_forwarding_terminal(&layout, ForwardingStrategy::DedicatedMidpoint),
            Err(Error::Selection(_))
        ));
    }

    #[test]
    fn shadowing_statistics() {
        let layout = drop_scenario(&GeometryConfig::default(), 5).unwrap();
        let (a, b) = (layout.interfered_bs(), layout.interfering_bs());
        let mut rng = seed::rng(9);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| link_gain(a, b, 3.0, 3.0, &mut rng).shadow_db)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let std = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
            / (draws.len() - 1) as f64)
            .sqrt();
        assert!(mean.abs() < 0.1);
        assert!((std - 3.0).abs() / 3.0 < 0.05, "{std}");
        let g = link_gain(a, b, 3.0, 3.0, &mut rng);
        assert!(g.total_gain_linear > 0.0);
        assert!((g.total_gain_linear - 10f64.powf(-g.total_loss_db() / 10.0)).abs() < 1e-30);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in ForwardingStrategy::ALL {
            assert_eq!(s.as_str().parse::<ForwardingStrategy>().unwrap(), s);
        }
        assert!("farthest".parse::<ForwardingStrategy>().is_err());
    }
}
