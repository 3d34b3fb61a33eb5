//! ECV wireless coverage: which FTUs a vehicle parked at a working site can
//! reach.
//!
//! Coverage is a pure geometric relation: FTU c is covered from site k by ECV
//! v iff the euclidean distance is at most the vehicle's radius (the boundary
//! counts as covered). Distances are computed in double precision with no
//! tolerance band; inputs are specified data, not measurements.

use crate::scenario::{euclid, EcvId, LineId, Scenario, SiteId};
use crate::topology::CellGraph;
use std::collections::{BTreeMap, BTreeSet};

/// Boolean association: ECV v at working site k covers FTU c.
#[derive(Debug, Clone)]
pub struct CoverageMap {
    covered: BTreeSet<(EcvId, SiteId, LineId)>,
    ecvs: Vec<EcvId>,
    sites: Vec<SiteId>,
    ftus: Vec<LineId>,
}

impl CoverageMap {
    pub fn is_covered(&self, ecv: &EcvId, site: &SiteId, ftu: &LineId) -> bool {
        self.covered
            .contains(&(ecv.clone(), site.clone(), ftu.clone()))
    }

    /// Working sites from which some ECV could govern the FTU
    /// (per-site: true when at least one vehicle's radius reaches it).
    pub fn sites_covering(&self, ftu: &LineId) -> Vec<&SiteId> {
        self.sites
            .iter()
            .filter(|k| self.ecvs.iter().any(|v| self.is_covered(v, k, ftu)))
            .collect()
    }

    /// FTUs reachable by the given ECV when parked at the given site.
    pub fn ftus_at(&self, ecv: &EcvId, site: &SiteId) -> Vec<&LineId> {
        self.ftus
            .iter()
            .filter(|c| self.is_covered(ecv, site, c))
            .collect()
    }

    /// Sites from which this particular ECV covers the FTU.
    pub fn sites_covering_for(&self, ecv: &EcvId, ftu: &LineId) -> Vec<&SiteId> {
        self.sites
            .iter()
            .filter(|k| self.is_covered(ecv, k, ftu))
            .collect()
    }

    pub fn ecvs(&self) -> &[EcvId] {
        &self.ecvs
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn ftus(&self) -> &[LineId] {
        &self.ftus
    }

    /// CSV dump, `ecv,site,ftu,covered` per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ecv,site,ftu,covered\n");
        for v in &self.ecvs {
            for k in &self.sites {
                for c in &self.ftus {
                    out.push_str(&format!(
                        "{v},{k},{c},{}\n",
                        if self.is_covered(v, k, c) { 1 } else { 0 }
                    ));
                }
            }
        }
        out
    }
}

/// Build the coverage table over all (ecv, candidate site, FTU) triples.
///
/// FTUs are those of healthy automatic switches (damaged or pre-fixed remote
/// ones never need ECV governance); sites flagged intact are excluded.
pub fn compute_coverage(scenario: &Scenario, cellgraph: &CellGraph) -> CoverageMap {
    let ftu_positions: BTreeMap<LineId, (f64, f64)> = cellgraph
        .switch_edges
        .iter()
        .filter(|e| matches!(e.class, crate::topology::SwitchClass::AutoHealthy))
        .map(|e| {
            let f = e.ftu.as_ref().expect("healthy auto switch has ftu");
            (e.line.clone(), (f.x, f.y))
        })
        .collect();
    let sites: Vec<SiteId> = scenario
        .ecv_sites
        .iter()
        .filter(|s| !s.intact)
        .map(|s| s.id.clone())
        .collect();
    let ecvs: Vec<EcvId> = scenario.ecvs.iter().map(|e| e.id.clone()).collect();

    let mut covered = BTreeSet::new();
    for ecv in &scenario.ecvs {
        for site_id in &sites {
            let site = scenario.ecv_site(site_id).expect("validated site");
            for (ftu, (fx, fy)) in &ftu_positions {
                // step function: distance exactly equal to the radius counts
                if euclid(*fx, *fy, site.x, site.y) <= ecv.radius {
                    covered.insert((ecv.id.clone(), site_id.clone(), ftu.clone()));
                }
            }
        }
    }
    CoverageMap {
        covered,
        ecvs,
        sites,
        ftus: ftu_positions.into_keys().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;
    use crate::topology::partition_cells;

    fn scenario_with_sites(radius: f64, sites: Vec<(f64, f64)>) -> Scenario {
        let site_json: Vec<serde_json::Value> = sites
            .iter()
            .enumerate()
            .map(|(i, (x, y))| serde_json::json!({"id": format!("k{}", i + 1), "x": x, "y": y}))
            .collect();
        let j = serde_json::json!({
            "nodes": [
                {"id": "n1", "x": 0.0, "y": 0.0},
                {"id": "n2", "x": 10.0, "y": 0.0}
            ],
            "lines": [
                {"id": "sw1", "from": "n1", "to": "n2",
                 "switch": {"kind": "automatic",
                            "ftu": {"side": "to", "x": 10.0, "y": 0.0}}}
            ],
            "sources": [{"node": "n1"}],
            "ecv_depots": [{"id": "E1", "x": 0.0, "y": 0.0, "capacity": 1}],
            "ecvs": [{"id": "v1", "depot": "E1", "radius": radius}],
            "ecv_sites": site_json
        });
        parse_scenario(&j.to_string()).unwrap()
    }

    #[test]
    fn zero_distance_covered() {
        let s = scenario_with_sites(0.5, vec![(10.0, 0.0)]);
        let cg = partition_cells(&s);
        let cov = compute_coverage(&s, &cg);
        assert!(cov.is_covered(&"v1".into(), &"k1".into(), &"sw1".into()));
    }

    #[test]
    fn boundary_distance_covered() {
        // distance exactly 5 with radius 5: the step function is 1 at zero
        let s = scenario_with_sites(5.0, vec![(10.0, 5.0)]);
        let cg = partition_cells(&s);
        let cov = compute_coverage(&s, &cg);
        assert!(cov.is_covered(&"v1".into(), &"k1".into(), &"sw1".into()));
        let s2 = scenario_with_sites(4.999, vec![(10.0, 5.0)]);
        let cov2 = compute_coverage(&s2, &partition_cells(&s2));
        assert!(!cov2.is_covered(&"v1".into(), &"k1".into(), &"sw1".into()));
    }

    #[test]
    fn inverse_views_consistent() {
        let s = scenario_with_sites(6.0, vec![(10.0, 5.0), (4.0, 0.0), (30.0, 0.0)]);
        let cg = partition_cells(&s);
        let cov = compute_coverage(&s, &cg);
        let covering = cov.sites_covering(&"sw1".into());
        assert_eq!(covering, vec![&SiteId::new("k1")]);
        assert_eq!(cov.ftus_at(&"v1".into(), &"k1".into()), vec![&LineId::new("sw1")]);
        assert!(cov.ftus_at(&"v1".into(), &"k3".into()).is_empty());
    }

    #[test]
    fn random_table_matches_bruteforce() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n_sites = rng.gen_range(1..=5usize);
            let sites: Vec<(f64, f64)> = (0..n_sites)
                .map(|_| (rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)))
                .collect();
            let radius = rng.gen_range(0.5..15.0);
            let s = scenario_with_sites(radius, sites.clone());
            let cg = partition_cells(&s);
            let cov = compute_coverage(&s, &cg);
            for (i, (x, y)) in sites.iter().enumerate() {
                let expect = euclid(*x, *y, 10.0, 0.0) <= radius;
                let site = SiteId::new(format!("k{}", i + 1));
                assert_eq!(cov.is_covered(&"v1".into(), &site, &"sw1".into()), expect);
            }
        }
    }

    #[test]
    fn enlarging_radius_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let sites: Vec<(f64, f64)> = (0..4)
                .map(|_| (rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)))
                .collect();
            let r1 = rng.gen_range(0.5..10.0);
            let r2 = r1 + rng.gen_range(0.0..10.0);
            let s1 = scenario_with_sites(r1, sites.clone());
            let s2 = scenario_with_sites(r2, sites.clone());
            let c1 = compute_coverage(&s1, &partition_cells(&s1));
            let c2 = compute_coverage(&s2, &partition_cells(&s2));
            for pair in &c1.covered {
                assert!(c2.covered.contains(pair), "radius growth removed coverage");
            }
        }
    }
}
