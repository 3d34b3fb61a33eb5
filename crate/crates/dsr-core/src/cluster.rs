//! Pre-assignment of repair working sites to depots and, within a depot, to
//! individual crews.
//!
//! The depot assignment minimizes total travel time subject to "every site
//! gets exactly one depot". Nothing couples distinct sites, so the optimum is
//! the per-site nearest depot; ties break toward the lexicographically
//! smallest depot id. The crew-level split follows the same nearest-first
//! idea, seeded at the depot, with a balance cap of ceil(n/k) sites per crew.

use crate::scenario::{CrewId, DepotId, RaPoint, Scenario};
use crate::topology::RepairSite;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("no crew depots defined")]
    NoDepots,
}

/// Assign every site to its nearest depot (total-travel-minimizing clustering).
pub fn assign_sites_to_depots<'a>(
    sites: &'a [RepairSite],
    scenario: &Scenario,
) -> Result<BTreeMap<DepotId, Vec<&'a RepairSite>>, ClusterError> {
    if scenario.crew_depots.is_empty() {
        return Err(ClusterError::NoDepots);
    }
    let mut clusters: BTreeMap<DepotId, Vec<&RepairSite>> = scenario
        .crew_depots
        .iter()
        .map(|d| (d.id.clone(), Vec::new()))
        .collect();
    for site in sites {
        let sp = RaPoint::Site(site.line.clone());
        let best = scenario
            .crew_depots
            .iter()
            .map(|d| {
                let t = scenario.ra_travel(&RaPoint::Depot(d.id.clone()), &sp);
                (t, d.id.clone())
            })
            .min_by(|a, b| a.partial_cmp(b).expect("finite travel times"))
            .expect("non-empty depots");
        clusters.get_mut(&best.1).expect("seeded").push(site);
    }
    Ok(clusters)
}

/// Total travel objective of a depot assignment (for tests and reports).
pub fn depot_assignment_cost(
    clusters: &BTreeMap<DepotId, Vec<&RepairSite>>,
    scenario: &Scenario,
) -> f64 {
    clusters
        .iter()
        .flat_map(|(d, sites)| {
            sites.iter().map(move |s| {
                scenario.ra_travel(&RaPoint::Depot(d.clone()), &RaPoint::Site(s.line.clone()))
            })
        })
        .sum()
}

/// Split one depot's cluster among its crews.
///
/// Round-robin nearest-next construction: in each round every crew (in id
/// order) grabs the unassigned site nearest to its current position (seeded at
/// the depot), until each holds at most ceil(n/k). Ties break on the smaller
/// line id.
pub fn assign_sites_to_crews<'a>(
    depot: &DepotId,
    cluster: &[&'a RepairSite],
    scenario: &Scenario,
) -> BTreeMap<CrewId, Vec<&'a RepairSite>> {
    let mut crews: Vec<CrewId> = scenario
        .crews_at(depot)
        .iter()
        .map(|c| c.id.clone())
        .collect();
    crews.sort();
    let mut result: BTreeMap<CrewId, Vec<&RepairSite>> =
        crews.iter().map(|c| (c.clone(), Vec::new())).collect();
    if crews.is_empty() || cluster.is_empty() {
        return result;
    }
    let cap = cluster.len().div_ceil(crews.len());
    let mut position: BTreeMap<CrewId, RaPoint> = crews
        .iter()
        .map(|c| (c.clone(), RaPoint::Depot(depot.clone())))
        .collect();
    let mut remaining: Vec<&RepairSite> = cluster.to_vec();
    while !remaining.is_empty() {
        for crew in &crews {
            if remaining.is_empty() {
                break;
            }
            if result[crew].len() >= cap {
                continue;
            }
            let here = position[crew].clone();
            let (idx, _) = remaining
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let t = scenario.ra_travel(&here, &RaPoint::Site(s.line.clone()));
                    (i, (t, s.line.clone()))
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite travel times"))
                .expect("non-empty remaining");
            let site = remaining.remove(idx);
            position.insert(crew.clone(), RaPoint::Site(site.line.clone()));
            result.get_mut(crew).expect("seeded").push(site);
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;
    use crate::topology::{partition_cells, repair_worksites};

    fn scenario(depots: Vec<(f64, f64)>, crews_per_depot: usize, fault_xs: Vec<f64>) -> Scenario {
        // faults strung along the x axis; depots at given coordinates
        let mut nodes = vec![serde_json::json!({"id": "n0", "x": -5.0, "y": 0.0})];
        let mut lines = Vec::new();
        let mut prev = "n0".to_string();
        for (i, x) in fault_xs.iter().enumerate() {
            let id = format!("n{}", i + 1);
            nodes.push(serde_json::json!({"id": id, "x": x, "y": 0.0}));
            lines.push(serde_json::json!({
                "id": format!("f{}", i + 1), "from": prev, "to": id,
                "faulted": true, "repair_minutes": 10.0
            }));
            prev = id;
        }
        let depot_json: Vec<serde_json::Value> = depots
            .iter()
            .enumerate()
            .map(|(i, (x, y))| {
                serde_json::json!({"id": format!("D{}", i + 1), "x": x, "y": y,
                                   "capacity": crews_per_depot})
            })
            .collect();
        let mut crews = Vec::new();
        for (i, _) in depots.iter().enumerate() {
            for c in 0..crews_per_depot {
                crews.push(serde_json::json!({
                    "id": format!("c{}{}", i + 1, c + 1),
                    "depot": format!("D{}", i + 1)
                }));
            }
        }
        let j = serde_json::json!({
            "nodes": nodes, "lines": lines,
            "sources": [{"node": "n0"}],
            "crew_depots": depot_json, "crews": crews
        });
        parse_scenario(&j.to_string()).unwrap()
    }

    #[test]
    fn single_depot_takes_all() {
        let s = scenario(vec![(0.0, 0.0)], 1, vec![1.0, 2.0, 3.0]);
        let cg = partition_cells(&s);
        let sites = repair_worksites(&cg, &s);
        let clusters = assign_sites_to_depots(&sites, &s).unwrap();
        assert_eq!(clusters[&DepotId::new("D1")].len(), 3);
    }

    #[test]
    fn equidistant_ties_to_lower_depot_id() {
        // fault f1 spans n0(-5,0)..n1(0,0): midpoint (-2.5, 0); depots mirrored
        let s = scenario(vec![(-2.5, 4.0), (-2.5, -4.0)], 1, vec![0.0]);
        let cg = partition_cells(&s);
        let sites = repair_worksites(&cg, &s);
        let clusters = assign_sites_to_depots(&sites, &s).unwrap();
        assert_eq!(clusters[&DepotId::new("D1")].len(), 1);
        assert!(clusters[&DepotId::new("D2")].is_empty());
    }

    #[test]
    fn matches_bruteforce_enumeration() {
        let s = scenario(
            vec![(0.0, 3.0), (10.0, -2.0), (20.0, 5.0)],
            1,
            vec![1.0, 4.0, 9.0, 13.0, 18.0, 22.0],
        );
        let cg = partition_cells(&s);
        let sites = repair_worksites(&cg, &s);
        let clusters = assign_sites_to_depots(&sites, &s).unwrap();
        let got = depot_assignment_cost(&clusters, &s);

        // brute force over all |D|^|W| assignments
        let depots: Vec<DepotId> = s.crew_depots.iter().map(|d| d.id.clone()).collect();
        let mut best = f64::INFINITY;
        let k = depots.len();
        let n = sites.len();
        for code in 0..k.pow(n as u32) {
            let mut c = code;
            let mut total = 0.0;
            for site in &sites {
                let d = &depots[c % k];
                c /= k;
                total += s.ra_travel(
                    &RaPoint::Depot(d.clone()),
                    &RaPoint::Site(site.line.clone()),
                );
            }
            best = best.min(total);
        }
        assert!((got - best).abs() < 1e-9, "greedy {got} vs optimal {best}");
    }

    #[test]
    fn depot_assignment_idempotent_and_order_free() {
        let s = scenario(vec![(0.0, 3.0), (10.0, -2.0)], 1, vec![1.0, 4.0, 9.0, 13.0]);
        let cg = partition_cells(&s);
        let mut sites = repair_worksites(&cg, &s);
        let a = assign_sites_to_depots(&sites, &s).unwrap();
        let cost_a = depot_assignment_cost(&a, &s);
        sites.reverse();
        let b = assign_sites_to_depots(&sites, &s).unwrap();
        let cost_b = depot_assignment_cost(&b, &s);
        assert_eq!(cost_a, cost_b);
        for (d, v) in &a {
            let mut la: Vec<_> = v.iter().map(|s| s.line.clone()).collect();
            let mut lb: Vec<_> = b[d].iter().map(|s| s.line.clone()).collect();
            la.sort();
            lb.sort();
            assert_eq!(la, lb);
        }
    }

    #[test]
    fn one_crew_takes_whole_cluster() {
        let s = scenario(vec![(0.0, 0.0)], 1, vec![1.0, 2.0]);
        let cg = partition_cells(&s);
        let sites = repair_worksites(&cg, &s);
        let clusters = assign_sites_to_depots(&sites, &s).unwrap();
        let split = assign_sites_to_crews(&DepotId::new("D1"), &clusters[&DepotId::new("D1")], &s);
        assert_eq!(split[&CrewId::new("c11")].len(), 2);
    }

    #[test]
    fn balance_cap_forces_even_split() {
        let s = scenario(vec![(0.0, 0.0)], 2, vec![1.0, 2.0, 3.0, 4.0]);
        let cg = partition_cells(&s);
        let sites = repair_worksites(&cg, &s);
        let clusters = assign_sites_to_depots(&sites, &s).unwrap();
        let split = assign_sites_to_crews(&DepotId::new("D1"), &clusters[&DepotId::new("D1")], &s);
        assert_eq!(split[&CrewId::new("c11")].len(), 2);
        assert_eq!(split[&CrewId::new("c12")].len(), 2);
    }

    #[test]
    fn crew_split_vs_bruteforce_capped_optimum() {
        // one-sided: the greedy split never beats the exhaustive capped optimum,
        // and covers all sites within the cap
        let s = scenario(vec![(0.0, 0.0)], 2, vec![1.0, 3.0, 4.0, 8.0, 9.0, 15.0, 16.0, 21.0]);
        let cg = partition_cells(&s);
        let sites = repair_worksites(&cg, &s);
        let clusters = assign_sites_to_depots(&sites, &s).unwrap();
        let cluster = &clusters[&DepotId::new("D1")];
        let split = assign_sites_to_crews(&DepotId::new("D1"), cluster, &s);
        let cap = cluster.len().div_ceil(2);
        let route_cost = |route: &[&RepairSite]| -> f64 {
            let mut here = RaPoint::Depot(DepotId::new("D1"));
            let mut total = 0.0;
            for site in route {
                let next = RaPoint::Site(site.line.clone());
                total += s.ra_travel(&here, &next);
                here = next;
            }
            total
        };
        let nearest_order = |subset: &[&RepairSite]| -> f64 {
            // crews run nearest-next within their share, matching the planner
            let mut rest: Vec<&RepairSite> = subset.to_vec();
            let mut here = RaPoint::Depot(DepotId::new("D1"));
            let mut total = 0.0;
            while !rest.is_empty() {
                let (i, _) = rest
                    .iter()
                    .enumerate()
                    .map(|(i, s2)| {
                        (i, (s.ra_travel(&here, &RaPoint::Site(s2.line.clone())), s2.line.clone()))
                    })
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .unwrap();
                let site = rest.remove(i);
                total += s.ra_travel(&here, &RaPoint::Site(site.line.clone()));
                here = RaPoint::Site(site.line.clone());
            }
            total
        };
        let mut got = 0.0;
        for (crew, route) in &split {
            assert!(route.len() <= cap, "cap violated for {crew}");
            got += route_cost(route);
        }
        let assigned: usize = split.values().map(|v| v.len()).sum();
        assert_eq!(assigned, cluster.len());

        // exhaustive over all 2^n capped bipartitions
        let n = cluster.len();
        let mut best = f64::INFINITY;
        for mask in 0..(1u32 << n) {
            let a: Vec<&RepairSite> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| cluster[i]).collect();
            let b: Vec<&RepairSite> = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| cluster[i]).collect();
            if a.len() > cap || b.len() > cap {
                continue;
            }
            best = best.min(nearest_order(&a) + nearest_order(&b));
        }
        assert!(got >= best - 1e-9, "greedy {got} beat exhaustive {best}");
    }
}
