//! Built-in games and their closed-form checks.
//!
//! * `blackwell`: state X, noisy signal S through a binary asymmetric
//!   channel, one decision A.
//! * `bagwell`: leader A1 observed by follower A2 through a binary
//!   asymmetric channel S (discretized Stackelberg duopoly).
//! * `signaling`: applicant type T, costly signal A1, noisy channel S,
//!   employer A2. The payoffs are illustrative defaults, not taken from any
//!   published calibration.
//! * `negutility`: 2×2 simultaneous game whose row payoff at (T, R) is
//!   `4 - theta`.
//! * `braess`: closed-form travel times of the symmetric 4000-driver
//!   congestion equilibrium (no MAID).

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::maid::{Maid, MaidDocument, NodeDoc, PlayerDoc, ThetaDoc, UtilityDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    Blackwell,
    Bagwell,
    Signaling,
    Braess,
    NegUtility,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 5] = [
        ScenarioId::Blackwell,
        ScenarioId::Bagwell,
        ScenarioId::Signaling,
        ScenarioId::Braess,
        ScenarioId::NegUtility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Blackwell => "blackwell",
            ScenarioId::Bagwell => "bagwell",
            ScenarioId::Signaling => "signaling",
            ScenarioId::Braess => "braess",
            ScenarioId::NegUtility => "negutility",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidOption(format!("unknown scenario `{s}`")))
    }
}

/// Construction options for [`build`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildParams {
    /// Bagwell only: a single noise parameter `eps` shared by both inputs.
    pub symmetric_channel: bool,
}

pub fn build(id: ScenarioId, params: &BuildParams) -> Result<Maid> {
    let doc = document(id, params)
        .ok_or_else(|| Error::InvalidOption("braess is evaluated in closed form and has no MAID".into()))?;
    Maid::from_document(&doc)
}

/// Document form of a scenario (what `scenarios/<file_name>` contains).
pub fn document(id: ScenarioId, params: &BuildParams) -> Option<MaidDocument> {
    match id {
        ScenarioId::Blackwell => Some(blackwell_doc()),
        ScenarioId::Bagwell if params.symmetric_channel => Some(bagwell_symmetric_doc()),
        ScenarioId::Bagwell => Some(bagwell_doc()),
        ScenarioId::Signaling => Some(signaling_doc()),
        ScenarioId::NegUtility => Some(negutility_doc()),
        ScenarioId::Braess => None,
    }
}

/// File name of a scenario document under `scenarios/`.
pub fn file_name(id: ScenarioId, params: &BuildParams) -> String {
    if id == ScenarioId::Bagwell && params.symmetric_channel {
        "bagwell_symmetric.json".into()
    } else {
        format!("{}.json", id.name())
    }
}

pub fn blackwell() -> Maid {
    build(ScenarioId::Blackwell, &BuildParams::default()).expect("valid scenario")
}

pub fn bagwell() -> Maid {
    build(ScenarioId::Bagwell, &BuildParams::default()).expect("valid scenario")
}

pub fn bagwell_symmetric() -> Maid {
    build(
        ScenarioId::Bagwell,
        &BuildParams {
            symmetric_channel: true,
        },
    )
    .expect("valid scenario")
}

pub fn signaling() -> Maid {
    build(ScenarioId::Signaling, &BuildParams::default()).expect("valid scenario")
}

pub fn negutility() -> Maid {
    build(ScenarioId::NegUtility, &BuildParams::default()).expect("valid scenario")
}

fn theta(name: &str, min: f64, max: f64, default: f64) -> ThetaDoc {
    ThetaDoc {
        name: name.into(),
        min,
        max,
        default,
    }
}

fn player(id: &str, beta: f64) -> PlayerDoc {
    PlayerDoc { id: id.into(), beta }
}

fn chance(id: &str, states: &[&str], cpd: Vec<Vec<Value>>) -> NodeDoc {
    NodeDoc {
        id: id.into(),
        kind: "chance".into(),
        player: None,
        states: states.iter().map(|s| s.to_string()).collect(),
        cpd: Some(cpd),
    }
}

fn decision(id: &str, player: &str, states: &[&str]) -> NodeDoc {
    NodeDoc {
        id: id.into(),
        kind: "decision".into(),
        player: Some(player.into()),
        states: states.iter().map(|s| s.to_string()).collect(),
        cpd: None,
    }
}

fn utility(player: &str, scope: &[&str], table: Vec<Value>) -> UtilityDoc {
    UtilityDoc {
        player: player.into(),
        scope: scope.iter().map(|s| s.to_string()).collect(),
        table,
    }
}

fn edge(a: &str, b: &str) -> (String, String) {
    (a.into(), b.into())
}

fn bac_rows(e0: &str, e1: &str) -> Vec<Vec<Value>> {
    vec![
        vec![json!(format!("1 - {e0}")), json!(e0)],
        vec![json!(e1), json!(format!("1 - {e1}"))],
    ]
}

fn blackwell_doc() -> MaidDocument {
    MaidDocument {
        description: Some(
            "Single decision maker observing a binary state X through a binary asymmetric channel S.".into(),
        ),
        theta: vec![theta("eps1", 0.0, 0.5, 0.17), theta("eps2", 0.0, 0.5, 0.22)],
        players: vec![player("agent", 5.0)],
        nodes: vec![
            chance("X", &["0", "1"], vec![vec![json!(0.5), json!(0.5)]]),
            chance("S", &["0", "1"], bac_rows("eps1", "eps2")),
            decision("A", "agent", &["0", "1"]),
        ],
        edges: vec![edge("X", "S"), edge("S", "A")],
        utilities: vec![utility(
            "agent",
            &["X", "A"],
            vec![json!(0.0), json!(-2.0), json!(0.0), json!(1.0)],
        )],
    }
}

fn bagwell_nodes(rows: Vec<Vec<Value>>) -> Vec<NodeDoc> {
    vec![
        decision("A1", "leader", &["L", "R"]),
        chance("S", &["L", "R"], rows),
        decision("A2", "follower", &["L", "R"]),
    ]
}

fn bagwell_utilities() -> Vec<UtilityDoc> {
    vec![
        utility(
            "leader",
            &["A1", "A2"],
            vec![json!(5.0), json!(3.0), json!(6.0), json!(4.0)],
        ),
        utility(
            "follower",
            &["A1", "A2"],
            vec![json!(2.0), json!(1.0), json!(3.0), json!(4.0)],
        ),
    ]
}

fn bagwell_doc() -> MaidDocument {
    MaidDocument {
        description: Some(
            "Leader-follower game: the follower observes the leader's move through a binary asymmetric channel.".into(),
        ),
        theta: vec![theta("eps1", 0.0, 0.5, 0.05), theta("eps2", 0.0, 0.5, 0.05)],
        players: vec![player("leader", 10.0), player("follower", 10.0)],
        nodes: bagwell_nodes(bac_rows("eps1", "eps2")),
        edges: vec![edge("A1", "S"), edge("S", "A2")],
        utilities: bagwell_utilities(),
    }
}

fn bagwell_symmetric_doc() -> MaidDocument {
    MaidDocument {
        description: Some("Leader-follower game with a binary symmetric channel.".into()),
        theta: vec![theta("eps", 0.0, 0.5, 0.05)],
        players: vec![player("leader", 10.0), player("follower", 10.0)],
        nodes: bagwell_nodes(bac_rows("eps", "eps")),
        edges: vec![edge("A1", "S"), edge("S", "A2")],
        utilities: bagwell_utilities(),
    }
}

fn signaling_doc() -> MaidDocument {
    let n = |v: f64| json!(v);
    MaidDocument {
        description: Some(
            "Noisy signaling: an applicant of private type T chooses a costly signal A1, the employer \
             sees it through channel S and decides A2. Payoffs are illustrative defaults: wage 4 on \
             hire, signal cost 3 (low type) or 1 (high type), employer gains 2 hiring a high type and \
             loses 2 hiring a low type."
                .into(),
        ),
        theta: vec![theta("eps1", 0.0, 0.5, 0.1), theta("eps2", 0.0, 0.5, 0.1)],
        players: vec![player("applicant", 4.0), player("employer", 4.0)],
        nodes: vec![
            chance("T", &["low", "high"], vec![vec![n(0.5), n(0.5)]]),
            decision("A1", "applicant", &["none", "signal"]),
            chance("S", &["none", "signal"], bac_rows("eps1", "eps2")),
            decision("A2", "employer", &["reject", "hire"]),
        ],
        edges: vec![edge("T", "A1"), edge("A1", "S"), edge("S", "A2")],
        utilities: vec![
            utility(
                "applicant",
                &["T", "A1", "A2"],
                vec![n(0.0), n(4.0), n(-3.0), n(1.0), n(0.0), n(4.0), n(-1.0), n(3.0)],
            ),
            utility("employer", &["T", "A2"], vec![n(0.0), n(-2.0), n(0.0), n(2.0)]),
        ],
    }
}

fn negutility_doc() -> MaidDocument {
    MaidDocument {
        description: Some("Simultaneous 2x2 game; the row payoff at (T, R) is 4 - theta.".into()),
        theta: vec![theta("theta", 0.0, 0.99, 0.0)],
        players: vec![player("row", 10.0), player("col", 10.0)],
        nodes: vec![decision("Row", "row", &["T", "B"]), decision("Col", "col", &["L", "R"])],
        edges: vec![],
        utilities: vec![
            utility(
                "row",
                &["Row", "Col"],
                vec![json!(1.0), json!("4 - theta"), json!(2.0), json!(3.0)],
            ),
            utility(
                "col",
                &["Row", "Col"],
                vec![json!(4.0), json!(1.0), json!(2.0), json!(3.0)],
            ),
        ],
    }
}

/// Mixed Nash equilibrium of the `negutility` game and its row-value slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegUtilityNash {
    pub p_top: f64,
    pub p_left: f64,
    pub v_row: f64,
    pub v_col: f64,
    pub dv_row_dtheta: f64,
}

pub fn negutility_nash(theta: f64) -> Result<NegUtilityNash> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::OutOfDomain {
            name: "theta".into(),
            value: theta,
            min: 0.0,
            max: 1.0,
        });
    }
    // Column indifference: 4p + 2(1-p) = p + 3(1-p).
    let p_top = 0.25;
    // Row indifference: p + (4-θ)(1-p) = 2p + 3(1-p).
    let p_left = (1.0 - theta) / (2.0 - theta);
    Ok(NegUtilityNash {
        p_top,
        p_left,
        v_row: (5.0 - 2.0 * theta) / (2.0 - theta),
        v_col: 2.5,
        dv_row_dtheta: 1.0 / ((2.0 - theta) * (2.0 - theta)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BraessVariant {
    NoHighway,
    HighwayOpen,
    NoisyPrior,
    PerfectSignal,
}

impl FromStr for BraessVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_highway" => Ok(BraessVariant::NoHighway),
            "highway_open" => Ok(BraessVariant::HighwayOpen),
            "noisy_prior" => Ok(BraessVariant::NoisyPrior),
            "perfect_signal" => Ok(BraessVariant::PerfectSignal),
            _ => Err(Error::InvalidOption(format!("unknown braess variant `{s}`"))),
        }
    }
}

/// Expected minutes per driver, plus the value of a unilateral deviation to
/// the highway where that is the relevant comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BraessTimes {
    pub travel_time: f64,
    pub deviation: Option<f64>,
}

const DRIVERS: f64 = 4000.0;
const FIXED_ROAD: f64 = 45.0;
const HIGHWAY: f64 = 4.0;
const P_OPEN: f64 = 0.1;

fn congested(drivers: f64) -> f64 {
    drivers / 100.0
}

pub fn braess_travel_times(variant: BraessVariant) -> BraessTimes {
    let half = DRIVERS / 2.0;
    let split = congested(half) + FIXED_ROAD;
    let all_highway = congested(DRIVERS) + HIGHWAY + congested(DRIVERS);
    match variant {
        BraessVariant::NoHighway => BraessTimes {
            travel_time: split,
            deviation: None,
        },
        BraessVariant::HighwayOpen => BraessTimes {
            travel_time: all_highway,
            deviation: None,
        },
        BraessVariant::NoisyPrior => {
            // A Start-A-End driver tries the highway: if open they join the
            // other half on B-End, otherwise they return to A and take A-End.
            let first_leg = congested(half) + HIGHWAY;
            let open = first_leg + congested(half + 1.0);
            let closed = first_leg + FIXED_ROAD;
            BraessTimes {
                travel_time: split,
                deviation: Some(P_OPEN * open + (1.0 - P_OPEN) * closed),
            }
        }
        BraessVariant::PerfectSignal => BraessTimes {
            travel_time: P_OPEN * all_highway + (1.0 - P_OPEN) * split,
            deviation: None,
        },
    }
}
