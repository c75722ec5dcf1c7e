//! Embedded replication networks.

use std::path::Path;

use crate::error::Result;
use crate::scenario::{ModelName, Scenario, ScenarioConfig, ScenarioInputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fixture {
    pub name: &'static str,
    pub description: &'static str,
    pub links: &'static str,
    pub demand: &'static str,
    pub routes: &'static str,
    /// Data not taken from a published table.
    pub assumed: &'static [&'static str],
}

/// Three parallel routes, one OD pair with demand 100 and capacity 100 on
/// every route.
pub const THREE_ROUTE: Fixture = Fixture {
    name: "three-route",
    description: "three parallel routes, demand 100, capacity 100 per route",
    links: include_str!("../../fixtures/three_route/links.csv"),
    demand: include_str!("../../fixtures/three_route/demand.csv"),
    routes: include_str!("../../fixtures/three_route/routes.csv"),
    assumed: &[
        "free-flow times and BPR coefficients of routes 1 and 2 (6.0/0.5 and 6.5/0.15)",
        "route 3 free-flow time 8.0, chosen to match its reported unloaded time",
    ],
};

/// Nguyen-Dupuis network (13 nodes, 19 links) with its 25-route table and
/// four OD pairs at demand 100.
pub const NGUYEN_DUPUIS: Fixture = Fixture {
    name: "nguyen-dupuis",
    description: "Nguyen-Dupuis network, 19 links, OD pairs (1,2) (1,3) (4,2) (4,3), 25 routes",
    links: include_str!("../../fixtures/nguyen_dupuis/links.csv"),
    demand: include_str!("../../fixtures/nguyen_dupuis/demand.csv"),
    routes: include_str!("../../fixtures/nguyen_dupuis/routes.csv"),
    assumed: &[
        "link free-flow times are the common literature values",
        "link capacities are assumed uniform at 100 (same as the three-route network)",
    ],
};

pub const FIXTURES: [Fixture; 2] = [THREE_ROUTE, NGUYEN_DUPUIS];

pub fn fixture(name: &str) -> Option<Fixture> {
    FIXTURES.iter().copied().find(|f| f.name == name)
}

impl Fixture {
    pub fn inputs(&self) -> ScenarioInputs {
        ScenarioInputs {
            links: self.links.into(),
            demand: self.demand.into(),
            routes: Some(self.routes.into()),
        }
    }

    /// Scenario config pointing at the fixture's table names.
    pub fn config(&self, model: ModelName) -> ScenarioConfig {
        let mut c = ScenarioConfig::new("links.csv", "demand.csv", model);
        c.name = Some(self.name.into());
        c.routes = Some("routes.csv".into());
        c
    }

    /// Builds a scenario through the regular scenario validation path.
    pub fn scenario(&self, config: ScenarioConfig) -> Result<Scenario> {
        Scenario::from_parts(config, self.inputs(), Path::new(self.name))
    }

    /// Writes the fixture tables and a scenario file into `dir`.
    pub fn export(&self, dir: &Path, config: &ScenarioConfig) -> Result<()> {
        use crate::error::Error;
        use crate::scenario::write_atomic;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join("links.csv"), self.links.as_bytes())?;
        write_atomic(&dir.join("demand.csv"), self.demand.as_bytes())?;
        write_atomic(&dir.join("routes.csv"), self.routes.as_bytes())?;
        let json = serde_json::to_string_pretty(config).expect("config serialization") + "\n";
        write_atomic(&dir.join("scenario.json"), json.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse() {
        let mut c = THREE_ROUTE.config(ModelName::EUnit);
        c.b = Some(1.0);
        let s = THREE_ROUTE.scenario(c).unwrap();
        assert_eq!(s.route_set.route_count(), 3);

        let mut c = NGUYEN_DUPUIS.config(ModelName::EUnit);
        c.b = Some(10.0);
        let s = NGUYEN_DUPUIS.scenario(c).unwrap();
        assert_eq!(s.network.link_count(), 19);
        assert_eq!(s.route_set.route_count(), 25);
        let counts: Vec<usize> = s.route_set.ods().iter().map(|o| o.routes.len()).collect();
        assert_eq!(counts, vec![8, 6, 5, 6]);
    }

    #[test]
    fn unit_flow_on_route_loads_its_links() {
        let mut c = NGUYEN_DUPUIS.config(ModelName::Due);
        c.name = None;
        let s = NGUYEN_DUPUIS.scenario(c).unwrap();
        let k = s.route_set.find_od(4, 3).unwrap();
        let mut f = vec![0.0; s.route_set.route_count()];
        f[s.route_set.range(k).start + 3] = 1.0;
        let st = crate::network::load_flows(&s.network, &s.route_set, &f).unwrap();
        for (i, v) in st.link_flows.iter().enumerate() {
            let expected = if [4, 13, 19].contains(&(i + 1)) { 1.0 } else { 0.0 };
            assert_eq!(*v, expected, "link {}", i + 1);
        }
    }
}
