//! Node-cell partition of the grid and the cell-level switch graph.
//!
//! A node cell is a maximal set of nodes connected by non-switch lines; it is
//! the atomic unit of energization. Switch-bearing lines become edges of the
//! cell graph. The module also derives the crews' working sites (switches and
//! faulted lines) with their damage-state classification.

use crate::scenario::{LineEnd, LineId, NodeId, Scenario, SwitchKind};
use serde::Serialize;
use std::collections::BTreeMap;

/// Index of a node cell. Cells are numbered in order of their smallest member
/// node's declaration index, so the numbering is deterministic.
pub type CellId = usize;

#[derive(Debug, Clone, Serialize)]
pub struct NodeCell {
    pub id: CellId,
    pub members: Vec<NodeId>,
    pub load_kw: f64,
    /// Objective weight of the cell: the sum of configured member node
    /// weights, or 1 when no member configures one.
    pub weight: f64,
    /// Faulted non-switch lines inside the cell.
    pub faults: Vec<LineId>,
    pub is_source: bool,
}

/// Damage-state classification of a switch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SwitchClass {
    /// Healthy automatic switch: remotely operable (given communication) or
    /// manually operable by a crew.
    AutoHealthy,
    /// Switch, FTU and serving base station all intact: remotely operable at
    /// any time, never visited by crews.
    AutoIntactRemote,
    /// Healthy manual switch.
    ManualHealthy,
    /// Faulted switch (damaged switch, damaged FTU, or faulted manual switch):
    /// manual operation only, after the stated repair. A damaged FTU costs no
    /// repair time.
    Faulted { repair_minutes: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct FtuAt {
    /// Cell at the FTU's side of the switch.
    pub cell: CellId,
    pub x: f64,
    pub y: f64,
    pub residual_minutes: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SwitchEdge {
    pub line: LineId,
    /// Cell containing the line's `from` node.
    pub cell_from: CellId,
    /// Cell containing the line's `to` node.
    pub cell_to: CellId,
    pub class: SwitchClass,
    pub manual_minutes: f64,
    pub auto_minutes: f64,
    /// FTU of a healthy automatic switch (remote operation only makes sense
    /// there).
    pub ftu: Option<FtuAt>,
}

impl SwitchEdge {
    pub fn other(&self, cell: CellId) -> CellId {
        if cell == self.cell_from {
            self.cell_to
        } else {
            self.cell_from
        }
    }

    pub fn is_faulted(&self) -> bool {
        matches!(self.class, SwitchClass::Faulted { .. })
    }

    pub fn repair_minutes(&self) -> f64 {
        match self.class {
            SwitchClass::Faulted { repair_minutes } => repair_minutes,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellGraph {
    pub cells: Vec<NodeCell>,
    /// Switch-bearing lines as cell-graph edges, in scenario declaration order.
    pub switch_edges: Vec<SwitchEdge>,
    /// r^e: containing cell per non-switch fault.
    pub fault_cell: BTreeMap<LineId, CellId>,
    pub node_cell: BTreeMap<NodeId, CellId>,
    /// Source cells and their earliest availability (minimum over the sources
    /// they contain), plus optional aggregate kW capacity (sum).
    pub sources: BTreeMap<CellId, SourceCell>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceCell {
    pub available_at: f64,
    pub max_kw: Option<f64>,
}

impl CellGraph {
    pub fn cell_of(&self, node: &NodeId) -> CellId {
        self.node_cell[node]
    }

    pub fn is_source(&self, cell: CellId) -> bool {
        self.sources.contains_key(&cell)
    }

    /// Cells with load (the set entering the unserved-time objective).
    pub fn load_cells(&self) -> impl Iterator<Item = &NodeCell> {
        self.cells.iter().filter(|c| c.load_kw > 0.0)
    }

    pub fn switch_edge(&self, line: &LineId) -> Option<&SwitchEdge> {
        self.switch_edges.iter().find(|e| &e.line == line)
    }

    /// Switch edges incident to a cell.
    pub fn edges_at(&self, cell: CellId) -> impl Iterator<Item = &SwitchEdge> {
        self.switch_edges
            .iter()
            .filter(move |e| e.cell_from == cell || e.cell_to == cell)
    }

    pub fn total_load(&self) -> f64 {
        self.cells.iter().map(|c| c.load_kw).sum()
    }
}

/// Partition the grid into node cells and build the cell-level switch graph.
///
/// Cells are the connected components of the grid with all switch-bearing
/// lines removed; faulted non-switch lines register in their component's
/// fault set; each switch becomes a cell-graph edge.
pub fn partition_cells(scenario: &Scenario) -> CellGraph {
    let index: BTreeMap<&str, usize> = scenario
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let n = scenario.nodes.len();
    let mut adj = vec![Vec::new(); n];
    for l in &scenario.lines {
        if l.switch.is_none() {
            let a = index[l.from.as_str()];
            let b = index[l.to.as_str()];
            adj[a].push(b);
            adj[b].push(a);
        }
    }

    // BFS from each node in declaration order; components therefore come out
    // ordered by smallest member index.
    let mut comp = vec![usize::MAX; n];
    let mut next_cell = 0usize;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let cell = next_cell;
        next_cell += 1;
        let mut queue = std::collections::VecDeque::from([start]);
        comp[start] = cell;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = cell;
                    queue.push_back(w);
                }
            }
        }
    }

    let mut cells: Vec<NodeCell> = (0..next_cell)
        .map(|id| NodeCell {
            id,
            members: Vec::new(),
            load_kw: 0.0,
            weight: 0.0,
            faults: Vec::new(),
            is_source: false,
        })
        .collect();
    let mut node_cell = BTreeMap::new();
    for (i, node) in scenario.nodes.iter().enumerate() {
        let c = comp[i];
        cells[c].members.push(node.id.clone());
        cells[c].load_kw += node.load_kw;
        node_cell.insert(node.id.clone(), c);
    }
    for cell in cells.iter_mut() {
        let configured: Vec<f64> = cell
            .members
            .iter()
            .filter_map(|m| scenario.node(m).and_then(|n| n.load_weight))
            .collect();
        cell.weight = if configured.is_empty() {
            1.0
        } else {
            configured.iter().sum()
        };
    }

    let mut fault_cell = BTreeMap::new();
    let mut switch_edges = Vec::new();
    for l in &scenario.lines {
        let ca = comp[index[l.from.as_str()]];
        let cb = comp[index[l.to.as_str()]];
        match &l.switch {
            None => {
                if l.faulted {
                    debug_assert_eq!(ca, cb);
                    cells[ca].faults.push(l.id.clone());
                    fault_cell.insert(l.id.clone(), ca);
                }
            }
            Some(sw) => {
                let class = if l.faulted {
                    SwitchClass::Faulted {
                        repair_minutes: l.repair_minutes,
                    }
                } else {
                    match sw.kind {
                        SwitchKind::Manual => SwitchClass::ManualHealthy,
                        SwitchKind::Automatic => {
                            let ftu = sw.ftu.as_ref().expect("validated: automatic has ftu");
                            if ftu.damaged {
                                // Damaged FTU: manual only; repairing the FTU
                                // itself is not urgent, so no repair time.
                                SwitchClass::Faulted { repair_minutes: 0.0 }
                            } else if sw.intact_remote {
                                SwitchClass::AutoIntactRemote
                            } else {
                                SwitchClass::AutoHealthy
                            }
                        }
                    }
                };
                let ftu = match (&class, &sw.ftu) {
                    (SwitchClass::AutoHealthy | SwitchClass::AutoIntactRemote, Some(f)) => {
                        Some(FtuAt {
                            cell: match f.side {
                                LineEnd::From => ca,
                                LineEnd::To => cb,
                            },
                            x: f.x,
                            y: f.y,
                            residual_minutes: f.residual_minutes,
                        })
                    }
                    _ => None,
                };
                switch_edges.push(SwitchEdge {
                    line: l.id.clone(),
                    cell_from: ca,
                    cell_to: cb,
                    class,
                    manual_minutes: sw.manual_op_minutes,
                    auto_minutes: sw.auto_op_minutes,
                    ftu,
                });
            }
        }
    }

    let mut sources: BTreeMap<CellId, SourceCell> = BTreeMap::new();
    for s in &scenario.sources {
        let c = comp[index[s.node.as_str()]];
        cells[c].is_source = true;
        match sources.entry(c) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(SourceCell {
                    available_at: s.available_at,
                    max_kw: s.max_kw,
                });
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sc = e.get_mut();
                sc.available_at = sc.available_at.min(s.available_at);
                // one uncapped source makes the whole cell uncapped
                sc.max_kw = match (sc.max_kw, s.max_kw) {
                    (Some(a), Some(b)) => Some(a + b),
                    _ => None,
                };
            }
        }
    }

    CellGraph {
        cells,
        switch_edges,
        fault_cell,
        node_cell,
        sources,
    }
}

/// One crew working site: a switch to operate and/or a faulted line to repair.
#[derive(Debug, Clone, Serialize)]
pub struct RepairSite {
    pub line: LineId,
    pub x: f64,
    pub y: f64,
    pub kind: RepairKind,
}

#[derive(Debug, Clone, Serialize)]
pub enum RepairKind {
    /// Faulted non-switch line inside cell `cell` (the r^e transfer).
    FaultOnly { repair_minutes: f64, cell: CellId },
    /// Healthy switch: dwell is the manual operation time.
    SwitchOnly { manual_minutes: f64 },
    /// Faulted switch: dwell is repair plus manual operation.
    FaultedSwitch {
        repair_minutes: f64,
        manual_minutes: f64,
    },
}

impl RepairSite {
    /// Crew dwell time at the site before traveling on.
    pub fn work_minutes(&self) -> f64 {
        match &self.kind {
            RepairKind::FaultOnly { repair_minutes, .. } => *repair_minutes,
            RepairKind::SwitchOnly { manual_minutes } => *manual_minutes,
            RepairKind::FaultedSwitch {
                repair_minutes,
                manual_minutes,
            } => repair_minutes + manual_minutes,
        }
    }

    pub fn is_fault(&self) -> bool {
        matches!(
            self.kind,
            RepairKind::FaultOnly { .. } | RepairKind::FaultedSwitch { .. }
        )
    }

    pub fn is_switch(&self) -> bool {
        matches!(
            self.kind,
            RepairKind::SwitchOnly { .. } | RepairKind::FaultedSwitch { .. }
        )
    }
}

/// The crews' ordered working-site set: switches (minus pre-fixed remotely
/// operable ones) united with faulted lines, in scenario declaration order.
/// Site coordinates are line midpoints.
pub fn repair_worksites(cellgraph: &CellGraph, scenario: &Scenario) -> Vec<RepairSite> {
    let mut sites = Vec::new();
    for l in &scenario.lines {
        let (x, y) = if l.switch.is_some() || l.faulted {
            scenario.line_midpoint(l)
        } else {
            continue;
        };
        let kind = match cellgraph.switch_edge(&l.id) {
            Some(edge) => match &edge.class {
                SwitchClass::AutoIntactRemote => continue,
                SwitchClass::Faulted { repair_minutes } => RepairKind::FaultedSwitch {
                    repair_minutes: *repair_minutes,
                    manual_minutes: edge.manual_minutes,
                },
                SwitchClass::AutoHealthy | SwitchClass::ManualHealthy => RepairKind::SwitchOnly {
                    manual_minutes: edge.manual_minutes,
                },
            },
            None => RepairKind::FaultOnly {
                repair_minutes: l.repair_minutes,
                cell: cellgraph.fault_cell[&l.id],
            },
        };
        sites.push(RepairSite {
            line: l.id.clone(),
            x,
            y,
            kind,
        });
    }
    sites
}
