//! Problem-instance data model, ingestion, validation and defaults.
//!
//! A scenario file is UTF-8 JSON with top-level keys `horizon_minutes`,
//! `start_time`, `nodes`, `lines`, `sources`, `crew_depots`, `ecv_depots`,
//! `crews`, `ecvs`, `ecv_sites`, `travel`, `defaults`, `weights`. The formal
//! schema lives in `docs/scenario-schema.md`. All scenario types are immutable
//! after construction.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invariant violated ({name}): {detail}")]
    Invariant { name: &'static str, detail: String },
    #[error("dangling reference: {0}")]
    DanglingRef(String),
}

fn invariant(name: &'static str, detail: String) -> ScenarioError {
    ScenarioError::Invariant { name, detail }
}

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

id_type!(NodeId);
id_type!(LineId);
id_type!(DepotId);
id_type!(CrewId);
id_type!(EcvId);
id_type!(
    /// Identifier of an ECV working site.
    SiteId
);

pub fn euclid(x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
    ((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub load_kw: f64,
    /// Per-node objective weight; cell weights are formed by summing the
    /// configured values (cells with no configured node weight default to 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_weight: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchKind {
    Automatic,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineEnd {
    From,
    To,
}

/// Feeder terminal unit: the battery-backed sensing/control device of an
/// automatic switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ftu {
    /// Which switch endpoint the FTU sits at.
    pub side: LineEnd,
    pub x: f64,
    pub y: f64,
    /// Backup-battery depletion time, minutes. Clamped to the horizon at load.
    pub residual_minutes: f64,
    /// Damaged FTU: the switch can only be operated manually (treated as a
    /// faulted switch with zero repair time).
    #[serde(default)]
    pub damaged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchSpec {
    pub kind: SwitchKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ftu: Option<Ftu>,
    pub manual_op_minutes: f64,
    pub auto_op_minutes: f64,
    /// Pre-fixed remote operability: the switch, its FTU and the serving base
    /// station are all intact, so it is remotely operable without ECVs and is
    /// excluded from the crews' working sites.
    #[serde(default)]
    pub intact_remote: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: LineId,
    pub from: NodeId,
    pub to: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<SwitchSpec>,
    #[serde(default)]
    pub faulted: bool,
    /// Repair duration if faulted, minutes.
    #[serde(default)]
    pub repair_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub node: NodeId,
    /// Substation / black-start availability, minutes.
    #[serde(default)]
    pub available_at: f64,
    /// Optional aggregate kW capacity (used only by the opt-in capacity check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_kw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGraph {
    pub nodes: Vec<Node>,
    pub lines: Vec<Line>,
    pub sources: Vec<Source>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Depot {
    pub id: DepotId,
    pub x: f64,
    pub y: f64,
    pub capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crew {
    pub id: CrewId,
    pub depot: DepotId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecv {
    pub id: EcvId,
    pub depot: DepotId,
    /// Wireless cover radius, in coordinate units.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcvWorkSite {
    pub id: SiteId,
    pub x: f64,
    pub y: f64,
    pub min_stay_minutes: f64,
    /// Intact base station already serving this location: the site is removed
    /// from the ECVs' candidate working sites.
    #[serde(default)]
    pub intact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TravelModel {
    EuclideanScaled {
        scale_minutes_per_unit: f64,
    },
    Explicit {
        /// ECV travel times, minutes: ca[from][to].
        ca: BTreeMap<String, BTreeMap<String, f64>>,
        /// Crew travel times, minutes: ra[from][to].
        ra: BTreeMap<String, BTreeMap<String, f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDefaults {
    pub repair_minutes: f64,
    pub manual_op_minutes: f64,
    pub auto_op_minutes: f64,
    pub ftu_residual_minutes: f64,
    pub min_stay_minutes: f64,
}

impl Default for TimeDefaults {
    fn default() -> Self {
        // Case-study defaults: repair 2 h, manual op 15 min, remote op 1 min,
        // FTU battery 4 h, minimum ECV stay 15 min.
        Self {
            repair_minutes: 120.0,
            manual_op_minutes: 15.0,
            auto_op_minutes: 1.0,
            ftu_residual_minutes: 240.0,
            min_stay_minutes: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub beta_ea: f64,
    pub beta_ra: f64,
    pub beta_ca: f64,
    pub omega1_ra: f64,
    pub omega2_ra: f64,
    pub omega1_ca: f64,
    pub omega2_ca: f64,
}

impl Default for WeightSet {
    fn default() -> Self {
        Self {
            beta_ea: 10.0,
            beta_ra: 1.0,
            beta_ca: 1.0,
            omega1_ra: 1.0,
            omega2_ra: 1.0,
            omega1_ca: 1.0,
            omega2_ca: 1.0,
        }
    }
}

/// A point a crew can occupy: a depot or a repair working site (a line).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RaPoint {
    Depot(DepotId),
    Site(LineId),
}

impl fmt::Display for RaPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RaPoint::Depot(d) => f.write_str(d.as_str()),
            RaPoint::Site(l) => f.write_str(l.as_str()),
        }
    }
}

/// A point an ECV can occupy: a depot or a candidate working site.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CaPoint {
    Depot(DepotId),
    Site(SiteId),
}

impl fmt::Display for CaPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaPoint::Depot(d) => f.write_str(d.as_str()),
            CaPoint::Site(s) => f.write_str(s.as_str()),
        }
    }
}

/// Immutable validated problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub horizon_minutes: f64,
    pub start_time: f64,
    pub nodes: Vec<Node>,
    pub lines: Vec<Line>,
    pub sources: Vec<Source>,
    pub crew_depots: Vec<Depot>,
    pub ecv_depots: Vec<Depot>,
    pub crews: Vec<Crew>,
    pub ecvs: Vec<Ecv>,
    pub ecv_sites: Vec<EcvWorkSite>,
    pub travel: TravelModel,
    pub defaults: TimeDefaults,
    pub weights: WeightSet,
}

/// Raw file form: every optional field is genuinely optional here and the
/// configured defaults are applied while building the [`Scenario`].
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    horizon_minutes: Option<f64>,
    #[serde(default)]
    start_time: Option<f64>,
    nodes: Vec<Node>,
    lines: Vec<LineFile>,
    sources: Vec<Source>,
    #[serde(default)]
    crew_depots: Vec<Depot>,
    #[serde(default)]
    ecv_depots: Vec<Depot>,
    #[serde(default)]
    crews: Vec<Crew>,
    #[serde(default)]
    ecvs: Vec<Ecv>,
    #[serde(default)]
    ecv_sites: Vec<EcvSiteFile>,
    #[serde(default)]
    travel: Option<TravelModel>,
    #[serde(default)]
    defaults: Option<TimeDefaults>,
    #[serde(default)]
    weights: Option<WeightSet>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineFile {
    id: LineId,
    from: NodeId,
    to: NodeId,
    #[serde(default)]
    switch: Option<SwitchFile>,
    #[serde(default)]
    faulted: bool,
    #[serde(default)]
    repair_minutes: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SwitchFile {
    kind: SwitchKind,
    #[serde(default)]
    ftu: Option<FtuFile>,
    #[serde(default)]
    manual_op_minutes: Option<f64>,
    #[serde(default)]
    auto_op_minutes: Option<f64>,
    #[serde(default)]
    intact_remote: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FtuFile {
    side: LineEnd,
    x: f64,
    y: f64,
    #[serde(default)]
    residual_minutes: Option<f64>,
    #[serde(default)]
    damaged: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EcvSiteFile {
    id: SiteId,
    x: f64,
    y: f64,
    #[serde(default)]
    min_stay_minutes: Option<f64>,
    #[serde(default)]
    intact: bool,
}

/// Load, default-fill and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Parse a scenario from JSON text (same pipeline as [`load_scenario`]).
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
    let scenario = lower(file)?;
    scenario.validate()?;
    Ok(scenario)
}

fn lower(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let defaults = file.defaults.unwrap_or_default();
    let horizon = file.horizon_minutes.unwrap_or(720.0);
    let lines = file
        .lines
        .into_iter()
        .map(|l| {
            let switch = l.switch.map(|sw| SwitchSpec {
                kind: sw.kind,
                ftu: sw.ftu.map(|f| Ftu {
                    side: f.side,
                    x: f.x,
                    y: f.y,
                    residual_minutes: f
                        .residual_minutes
                        .unwrap_or(defaults.ftu_residual_minutes)
                        .min(horizon),
                    damaged: f.damaged,
                }),
                manual_op_minutes: sw.manual_op_minutes.unwrap_or(defaults.manual_op_minutes),
                auto_op_minutes: sw.auto_op_minutes.unwrap_or(defaults.auto_op_minutes),
                intact_remote: sw.intact_remote,
            });
            Line {
                id: l.id,
                from: l.from,
                to: l.to,
                switch,
                faulted: l.faulted,
                repair_minutes: l
                    .repair_minutes
                    .unwrap_or(if l.faulted { defaults.repair_minutes } else { 0.0 }),
            }
        })
        .collect();
    let ecv_sites = file
        .ecv_sites
        .into_iter()
        .map(|s| EcvWorkSite {
            id: s.id,
            x: s.x,
            y: s.y,
            min_stay_minutes: s.min_stay_minutes.unwrap_or(defaults.min_stay_minutes),
            intact: s.intact,
        })
        .collect();
    Ok(Scenario {
        description: file.description,
        horizon_minutes: horizon,
        start_time: file.start_time.unwrap_or(0.0),
        nodes: file.nodes,
        lines,
        sources: file.sources,
        crew_depots: file.crew_depots,
        ecv_depots: file.ecv_depots,
        crews: file.crews,
        ecvs: file.ecvs,
        ecv_sites,
        travel: file
            .travel
            .unwrap_or(TravelModel::EuclideanScaled { scale_minutes_per_unit: 1.0 }),
        defaults,
        weights: file.weights.unwrap_or_default(),
    })
}

fn check_id(kind: &str, id: &str) -> Result<(), ScenarioError> {
    if id.is_empty() || id.len() > 64 || id.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(invariant(
            "identifier",
            format!("{kind} id {id:?} must be 1..=64 non-whitespace characters"),
        ));
    }
    Ok(())
}

impl Scenario {
    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    pub fn line(&self, id: &LineId) -> Option<&Line> {
        self.lines.iter().find(|l| &l.id == id)
    }

    pub fn crew(&self, id: &CrewId) -> Option<&Crew> {
        self.crews.iter().find(|c| &c.id == id)
    }

    pub fn ecv(&self, id: &EcvId) -> Option<&Ecv> {
        self.ecvs.iter().find(|e| &e.id == id)
    }

    pub fn crew_depot(&self, id: &DepotId) -> Option<&Depot> {
        self.crew_depots.iter().find(|d| &d.id == id)
    }

    pub fn ecv_depot(&self, id: &DepotId) -> Option<&Depot> {
        self.ecv_depots.iter().find(|d| &d.id == id)
    }

    pub fn ecv_site(&self, id: &SiteId) -> Option<&EcvWorkSite> {
        self.ecv_sites.iter().find(|s| &s.id == id)
    }

    /// Midpoint of a line, the travel surrogate for its working site.
    pub fn line_midpoint(&self, line: &Line) -> (f64, f64) {
        let a = self.node(&line.from).expect("validated endpoint");
        let b = self.node(&line.to).expect("validated endpoint");
        ((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
    }

    /// Candidate crew working sites before damage-state filtering:
    /// every switch-bearing line and every faulted line.
    pub fn candidate_repair_lines(&self) -> impl Iterator<Item = &Line> {
        self.lines.iter().filter(|l| l.switch.is_some() || l.faulted)
    }

    fn ra_coord(&self, p: &RaPoint) -> Result<(f64, f64), ScenarioError> {
        match p {
            RaPoint::Depot(d) => {
                let d = self
                    .crew_depot(d)
                    .ok_or_else(|| ScenarioError::DanglingRef(format!("crew depot {d}")))?;
                Ok((d.x, d.y))
            }
            RaPoint::Site(l) => {
                let l = self
                    .line(l)
                    .ok_or_else(|| ScenarioError::DanglingRef(format!("line {l}")))?;
                Ok(self.line_midpoint(l))
            }
        }
    }

    fn ca_coord(&self, p: &CaPoint) -> Result<(f64, f64), ScenarioError> {
        match p {
            CaPoint::Depot(d) => {
                let d = self
                    .ecv_depot(d)
                    .ok_or_else(|| ScenarioError::DanglingRef(format!("ecv depot {d}")))?;
                Ok((d.x, d.y))
            }
            CaPoint::Site(s) => {
                let s = self
                    .ecv_site(s)
                    .ok_or_else(|| ScenarioError::DanglingRef(format!("ecv site {s}")))?;
                Ok((s.x, s.y))
            }
        }
    }

    /// Crew travel time in minutes between two points.
    pub fn ra_travel(&self, a: &RaPoint, b: &RaPoint) -> f64 {
        if a == b {
            return 0.0;
        }
        match &self.travel {
            TravelModel::EuclideanScaled { scale_minutes_per_unit } => {
                let (x1, y1) = self.ra_coord(a).expect("validated point");
                let (x2, y2) = self.ra_coord(b).expect("validated point");
                scale_minutes_per_unit * euclid(x1, y1, x2, y2)
            }
            TravelModel::Explicit { ra, .. } => ra[&a.to_string()][&b.to_string()],
        }
    }

    /// ECV travel time in minutes between two points.
    pub fn ca_travel(&self, a: &CaPoint, b: &CaPoint) -> f64 {
        if a == b {
            return 0.0;
        }
        match &self.travel {
            TravelModel::EuclideanScaled { scale_minutes_per_unit } => {
                let (x1, y1) = self.ca_coord(a).expect("validated point");
                let (x2, y2) = self.ca_coord(b).expect("validated point");
                scale_minutes_per_unit * euclid(x1, y1, x2, y2)
            }
            TravelModel::Explicit { ca, .. } => ca[&a.to_string()][&b.to_string()],
        }
    }

    /// Crews stationed at the given depot, in declaration order.
    pub fn crews_at(&self, depot: &DepotId) -> Vec<&Crew> {
        self.crews.iter().filter(|c| &c.depot == depot).collect()
    }

    pub fn ecvs_at(&self, depot: &DepotId) -> Vec<&Ecv> {
        self.ecvs.iter().filter(|e| &e.depot == depot).collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.horizon_minutes > 0.0) || !self.horizon_minutes.is_finite() {
            return Err(invariant(
                "horizon",
                format!("horizon_minutes must be positive, got {}", self.horizon_minutes),
            ));
        }
        if !(self.start_time >= 0.0 && self.start_time < self.horizon_minutes) {
            return Err(invariant(
                "start-time",
                format!(
                    "start_time must satisfy 0 <= T0 < horizon, got {}",
                    self.start_time
                ),
            ));
        }

        // Identifier uniqueness, per category.
        fn unique<'a>(
            kind: &'static str,
            ids: impl Iterator<Item = &'a str>,
        ) -> Result<BTreeSet<&'a str>, ScenarioError> {
            let mut seen = BTreeSet::new();
            for id in ids {
                check_id(kind, id)?;
                if !seen.insert(id) {
                    return Err(invariant("unique-ids", format!("duplicate {kind} id {id:?}")));
                }
            }
            Ok(seen)
        }
        let node_ids = unique("node", self.nodes.iter().map(|n| n.id.as_str()))?;
        let line_ids = unique("line", self.lines.iter().map(|l| l.id.as_str()))?;
        let crew_depot_ids = unique("crew depot", self.crew_depots.iter().map(|d| d.id.as_str()))?;
        let ecv_depot_ids = unique("ecv depot", self.ecv_depots.iter().map(|d| d.id.as_str()))?;
        unique("crew", self.crews.iter().map(|c| c.id.as_str()))?;
        unique("ecv", self.ecvs.iter().map(|e| e.id.as_str()))?;
        let site_ids = unique("ecv site", self.ecv_sites.iter().map(|s| s.id.as_str()))?;
        // Categories sharing a travel/variable namespace must not collide.
        if let Some(id) = crew_depot_ids.intersection(&line_ids).next() {
            return Err(invariant(
                "unique-ids",
                format!("id {id:?} used both as crew depot and line"),
            ));
        }
        if let Some(id) = ecv_depot_ids.intersection(&site_ids).next() {
            return Err(invariant(
                "unique-ids",
                format!("id {id:?} used both as ecv depot and ecv site"),
            ));
        }

        for n in &self.nodes {
            if !(n.load_kw >= 0.0) {
                return Err(invariant(
                    "load",
                    format!("node {} load_kw must be >= 0", n.id),
                ));
            }
            if let Some(w) = n.load_weight {
                if !(w >= 0.0) {
                    return Err(invariant(
                        "load",
                        format!("node {} load_weight must be >= 0", n.id),
                    ));
                }
            }
        }

        for l in &self.lines {
            if !node_ids.contains(l.from.as_str()) {
                return Err(ScenarioError::DanglingRef(format!(
                    "line {} endpoint {}",
                    l.id, l.from
                )));
            }
            if !node_ids.contains(l.to.as_str()) {
                return Err(ScenarioError::DanglingRef(format!(
                    "line {} endpoint {}",
                    l.id, l.to
                )));
            }
            if l.from == l.to {
                return Err(invariant(
                    "endpoints",
                    format!("line {} is a self-loop", l.id),
                ));
            }
            if l.faulted && !(l.repair_minutes > 0.0) {
                return Err(invariant(
                    "fault-repair",
                    format!("faulted line {} needs repair_minutes > 0", l.id),
                ));
            }
            if let Some(sw) = &l.switch {
                if !(sw.manual_op_minutes > 0.0) || !(sw.auto_op_minutes > 0.0) {
                    return Err(invariant(
                        "switch-times",
                        format!("switch {} operation times must be > 0", l.id),
                    ));
                }
                match sw.kind {
                    SwitchKind::Automatic => {
                        let ftu = sw.ftu.as_ref().ok_or_else(|| {
                            invariant(
                                "switch-ftu",
                                format!("automatic switch {} requires an ftu", l.id),
                            )
                        })?;
                        if !(ftu.residual_minutes >= 0.0) {
                            return Err(invariant(
                                "ftu-residual",
                                format!("ftu of switch {} residual must be >= 0", l.id),
                            ));
                        }
                        if sw.intact_remote && (ftu.damaged || l.faulted) {
                            return Err(invariant(
                                "intact-remote",
                                format!(
                                    "switch {} marked intact_remote but switch or FTU is damaged",
                                    l.id
                                ),
                            ));
                        }
                    }
                    SwitchKind::Manual => {
                        if sw.ftu.is_some() {
                            return Err(invariant(
                                "switch-ftu",
                                format!("manual switch {} must not carry an ftu", l.id),
                            ));
                        }
                        if sw.intact_remote {
                            return Err(invariant(
                                "intact-remote",
                                format!("manual switch {} cannot be intact_remote", l.id),
                            ));
                        }
                    }
                }
            }
        }

        if self.sources.is_empty() {
            return Err(invariant("source-exists", "at least one source required".into()));
        }
        for s in &self.sources {
            if !node_ids.contains(s.node.as_str()) {
                return Err(ScenarioError::DanglingRef(format!("source node {}", s.node)));
            }
            if !(s.available_at >= 0.0) {
                return Err(invariant(
                    "source-availability",
                    format!("source {} available_at must be >= 0", s.node),
                ));
            }
        }

        // Connectivity with all switches closed, and each switch must bridge
        // two distinct node cells (components of the switch-free grid).
        {
            let index: BTreeMap<&str, usize> = self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| (n.id.as_str(), i))
                .collect();
            let mut adj = vec![Vec::new(); self.nodes.len()];
            let mut adj_no_switch = vec![Vec::new(); self.nodes.len()];
            for l in &self.lines {
                let a = index[l.from.as_str()];
                let b = index[l.to.as_str()];
                adj[a].push(b);
                adj[b].push(a);
                if l.switch.is_none() {
                    adj_no_switch[a].push(b);
                    adj_no_switch[b].push(a);
                }
            }
            let reach = |adj: &Vec<Vec<usize>>, start: usize| -> Vec<bool> {
                let mut seen = vec![false; adj.len()];
                let mut stack = vec![start];
                seen[start] = true;
                while let Some(v) = stack.pop() {
                    for &w in &adj[v] {
                        if !seen[w] {
                            seen[w] = true;
                            stack.push(w);
                        }
                    }
                }
                seen
            };
            if !self.nodes.is_empty() {
                let seen = reach(&adj, 0);
                if let Some(i) = seen.iter().position(|s| !s) {
                    return Err(invariant(
                        "connected",
                        format!(
                            "grid with all switches closed is disconnected (node {})",
                            self.nodes[i].id
                        ),
                    ));
                }
                let mut comp = vec![usize::MAX; self.nodes.len()];
                let mut next = 0;
                for v in 0..self.nodes.len() {
                    if comp[v] != usize::MAX {
                        continue;
                    }
                    for (w, r) in reach(&adj_no_switch, v).into_iter().enumerate() {
                        if r && comp[w] == usize::MAX {
                            comp[w] = next;
                        }
                    }
                    next += 1;
                }
                for l in &self.lines {
                    if l.switch.is_some()
                        && comp[index[l.from.as_str()]] == comp[index[l.to.as_str()]]
                    {
                        return Err(invariant(
                            "switch-bridges-cells",
                            format!("switch line {} connects nodes of the same node cell", l.id),
                        ));
                    }
                }
            }
        }

        for c in &self.crews {
            if !crew_depot_ids.contains(c.depot.as_str()) {
                return Err(ScenarioError::DanglingRef(format!(
                    "crew {} depot {}",
                    c.id, c.depot
                )));
            }
        }
        for e in &self.ecvs {
            if !ecv_depot_ids.contains(e.depot.as_str()) {
                return Err(ScenarioError::DanglingRef(format!(
                    "ecv {} depot {}",
                    e.id, e.depot
                )));
            }
            if !(e.radius > 0.0) || !e.radius.is_finite() {
                return Err(invariant(
                    "radius",
                    format!("ecv {} radius must be finite and > 0", e.id),
                ));
            }
        }
        for d in &self.crew_depots {
            let fleet = self.crews_at(&d.id).len();
            if fleet > d.capacity {
                return Err(invariant(
                    "depot-capacity",
                    format!("crew depot {} holds {fleet} crews, capacity {}", d.id, d.capacity),
                ));
            }
        }
        for d in &self.ecv_depots {
            let fleet = self.ecvs_at(&d.id).len();
            if fleet > d.capacity {
                return Err(invariant(
                    "depot-capacity",
                    format!("ecv depot {} holds {fleet} ecvs, capacity {}", d.id, d.capacity),
                ));
            }
        }
        for s in &self.ecv_sites {
            if !(s.min_stay_minutes >= 0.0) || s.min_stay_minutes > self.horizon_minutes {
                return Err(invariant(
                    "min-stay",
                    format!("ecv site {} min_stay must be in [0, horizon]", s.id),
                ));
            }
        }

        let w = &self.weights;
        for (name, v) in [
            ("beta_ea", w.beta_ea),
            ("beta_ra", w.beta_ra),
            ("beta_ca", w.beta_ca),
            ("omega1_ra", w.omega1_ra),
            ("omega2_ra", w.omega2_ra),
            ("omega1_ca", w.omega1_ca),
            ("omega2_ca", w.omega2_ca),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invariant("weights", format!("{name} must be >= 0")));
            }
        }
        if !(w.beta_ea > 0.0) {
            return Err(invariant("weights", "beta_ea must be > 0".into()));
        }

        self.validate_travel()?;
        Ok(())
    }

    fn validate_travel(&self) -> Result<(), ScenarioError> {
        match &self.travel {
            TravelModel::EuclideanScaled { scale_minutes_per_unit } => {
                if !(*scale_minutes_per_unit > 0.0) || !scale_minutes_per_unit.is_finite() {
                    return Err(invariant(
                        "travel-scale",
                        "scale_minutes_per_unit must be finite and > 0".into(),
                    ));
                }
                Ok(())
            }
            TravelModel::Explicit { ca, ra } => {
                let ra_pts: Vec<String> = self
                    .crew_depots
                    .iter()
                    .map(|d| d.id.0.clone())
                    .chain(self.candidate_repair_lines().map(|l| l.id.0.clone()))
                    .collect();
                let ca_pts: Vec<String> = self
                    .ecv_depots
                    .iter()
                    .map(|d| d.id.0.clone())
                    .chain(self.ecv_sites.iter().map(|s| s.id.0.clone()))
                    .collect();
                for (name, pts, m) in [("ra", &ra_pts, ra), ("ca", &ca_pts, ca)] {
                    for a in pts {
                        for b in pts {
                            let Some(v) = m.get(a).and_then(|row| row.get(b)) else {
                                return Err(invariant(
                                    "travel-explicit",
                                    format!("{name} travel entry {a} -> {b} missing"),
                                ));
                            };
                            if !v.is_finite() || *v < 0.0 {
                                return Err(invariant(
                                    "travel-explicit",
                                    format!("{name} travel entry {a} -> {b} must be finite, >= 0"),
                                ));
                            }
                            if a == b && *v != 0.0 {
                                return Err(invariant(
                                    "travel-explicit",
                                    format!("{name} travel diagonal {a} must be 0"),
                                ));
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// Materialize the travel model as explicit matrices
/// (`T_ij = scale * euclidean distance`, no rounding).
pub fn derive_travel(scenario: &Scenario) -> Result<TravelModel, ScenarioError> {
    let TravelModel::EuclideanScaled { .. } = &scenario.travel else {
        return Ok(scenario.travel.clone());
    };
    let ra_pts: Vec<RaPoint> = scenario
        .crew_depots
        .iter()
        .map(|d| RaPoint::Depot(d.id.clone()))
        .chain(
            scenario
                .candidate_repair_lines()
                .map(|l| RaPoint::Site(l.id.clone())),
        )
        .collect();
    let ca_pts: Vec<CaPoint> = scenario
        .ecv_depots
        .iter()
        .map(|d| CaPoint::Depot(d.id.clone()))
        .chain(scenario.ecv_sites.iter().map(|s| CaPoint::Site(s.id.clone())))
        .collect();
    let mut ra = BTreeMap::new();
    for a in &ra_pts {
        let mut row = BTreeMap::new();
        for b in &ra_pts {
            row.insert(b.to_string(), scenario.ra_travel(a, b));
        }
        ra.insert(a.to_string(), row);
    }
    let mut ca = BTreeMap::new();
    for a in &ca_pts {
        let mut row = BTreeMap::new();
        for b in &ca_pts {
            row.insert(b.to_string(), scenario.ca_travel(a, b));
        }
        ca.insert(a.to_string(), row);
    }
    Ok(TravelModel::Explicit { ca, ra })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "nodes": [
                {"id": "n1", "x": 0.0, "y": 0.0, "load_kw": 10.0},
                {"id": "n2", "x": 3.0, "y": 4.0, "load_kw": 0.0}
            ],
            "lines": [
                {"id": "l1", "from": "n1", "to": "n2",
                 "switch": {"kind": "automatic",
                            "ftu": {"side": "to", "x": 3.0, "y": 4.0}}}
            ],
            "sources": [{"node": "n1", "available_at": 30.0}],
            "crew_depots": [{"id": "D1", "x": 0.0, "y": 1.0, "capacity": 2}],
            "crews": [{"id": "c1", "depot": "D1"}]
        })
    }

    #[test]
    fn defaults_applied() {
        let s = parse_scenario(&minimal_json().to_string()).unwrap();
        assert_eq!(s.horizon_minutes, 720.0);
        assert_eq!(s.start_time, 0.0);
        let sw = s.lines[0].switch.as_ref().unwrap();
        // Remote operation defaults to 1 minute, manual to 15.
        assert_eq!(sw.auto_op_minutes, 1.0);
        assert_eq!(sw.manual_op_minutes, 15.0);
        assert_eq!(sw.ftu.as_ref().unwrap().residual_minutes, 240.0);
    }

    #[test]
    fn residual_clamped_to_horizon() {
        let mut j = minimal_json();
        j["horizon_minutes"] = serde_json::json!(100.0);
        j["lines"][0]["switch"]["ftu"]["residual_minutes"] = serde_json::json!(500.0);
        let s = parse_scenario(&j.to_string()).unwrap();
        assert_eq!(
            s.lines[0].switch.as_ref().unwrap().ftu.as_ref().unwrap().residual_minutes,
            100.0
        );
    }

    #[test]
    fn dangling_crew_depot_rejected() {
        let mut j = minimal_json();
        j["crews"][0]["depot"] = serde_json::json!("nope");
        let err = parse_scenario(&j.to_string()).unwrap_err();
        assert!(matches!(err, ScenarioError::DanglingRef(_)), "{err}");
    }

    #[test]
    fn faulted_needs_positive_repair() {
        let mut j = minimal_json();
        j["lines"][0]["faulted"] = serde_json::json!(true);
        j["lines"][0]["repair_minutes"] = serde_json::json!(0.0);
        let err = parse_scenario(&j.to_string()).unwrap_err();
        assert!(err.to_string().contains("fault-repair"), "{err}");
    }

    #[test]
    fn manual_switch_with_ftu_rejected() {
        let mut j = minimal_json();
        j["lines"][0]["switch"]["kind"] = serde_json::json!("manual");
        let err = parse_scenario(&j.to_string()).unwrap_err();
        assert!(err.to_string().contains("switch-ftu"), "{err}");
    }

    #[test]
    fn disconnected_grid_rejected() {
        let mut j = minimal_json();
        j["nodes"]
            .as_array_mut()
            .unwrap()
            .push(serde_json::json!({"id": "n3", "x": 9.0, "y": 9.0, "load_kw": 1.0}));
        let err = parse_scenario(&j.to_string()).unwrap_err();
        assert!(err.to_string().contains("connected"), "{err}");
    }

    #[test]
    fn travel_three_four_five() {
        let s = parse_scenario(&minimal_json().to_string()).unwrap();
        // scale defaults to 1 min/unit; (0,0) to (3,4) is the 3-4-5 triangle
        let site = RaPoint::Site(LineId::new("l1"));
        let depot = RaPoint::Depot(DepotId::new("D1"));
        let (mx, my) = s.line_midpoint(&s.lines[0]);
        assert_eq!((mx, my), (1.5, 2.0));
        let expect = euclid(0.0, 1.0, 1.5, 2.0);
        assert!((s.ra_travel(&depot, &site) - expect).abs() < 1e-12);
        assert_eq!(s.ra_travel(&depot, &depot), 0.0);
    }

    #[test]
    fn derive_travel_symmetric_zero_diagonal() {
        let s = parse_scenario(&minimal_json().to_string()).unwrap();
        let t = derive_travel(&s).unwrap();
        let TravelModel::Explicit { ra, .. } = t else { panic!("expected explicit") };
        for (a, row) in &ra {
            for (b, v) in row {
                assert_eq!(*v, ra[b][a], "symmetry {a} {b}");
                if a == b {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn roundtrip_identical() {
        let s = parse_scenario(&minimal_json().to_string()).unwrap();
        let text = serde_json::to_string_pretty(&s).unwrap();
        let s2 = parse_scenario(&text).unwrap();
        assert_eq!(s, s2);
    }
}
