//! CSV readers and writers for links, demand and route tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::network::{Link, LinkId, Network, NodeId, OdPair, RouteSet, DEFAULT_ALPHA, DEFAULT_BETA};

#[derive(Debug, Deserialize)]
struct LinkRow {
    from: NodeId,
    to: NodeId,
    fftt: f64,
    capacity: f64,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct DemandRow {
    origin: NodeId,
    destination: NodeId,
    demand: f64,
}

#[derive(Debug, Deserialize)]
struct RouteRow {
    origin: NodeId,
    destination: NodeId,
    route_id: u32,
    link_ids: String,
}

fn parse_error(path: &Path, err: &csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line() as usize);
    let message = match err.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => err.to_string(),
    };
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn rows<R: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<Vec<(usize, R)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.deserialize::<R>() {
        match rec {
            Ok(row) => out.push(row),
            Err(e) => return Err(parse_error(path, &e)),
        }
    }
    // Line numbers for semantic errors: header is line 1.
    Ok(out.into_iter().enumerate().map(|(i, r)| (i + 2, r)).collect())
}

fn at_line(path: &Path, line: usize, err: Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: err.to_string(),
    }
}

/// Links file `from,to,fftt,capacity,alpha,beta`; link ids follow row order
/// starting at 1. Empty `alpha`/`beta` cells take the BPR defaults.
pub fn parse_links(text: &str, path: &Path) -> Result<Network<f64>> {
    let mut links = Vec::new();
    for (i, (line, row)) in rows::<LinkRow>(text, path)?.into_iter().enumerate() {
        let link = Link::with_bpr(
            i + 1,
            row.from,
            row.to,
            row.fftt,
            row.capacity,
            row.alpha.unwrap_or(DEFAULT_ALPHA),
            row.beta.unwrap_or(DEFAULT_BETA),
        )
        .map_err(|e| at_line(path, line, e))?;
        links.push(link);
    }
    if links.is_empty() {
        return Err(Error::Empty(format!("{}: no links", path.display())));
    }
    Network::new(links)
}

/// Demand file `origin,destination,demand`, in file order.
pub fn parse_demand(text: &str, path: &Path) -> Result<Vec<OdPair<f64>>> {
    let mut pairs: Vec<OdPair<f64>> = Vec::new();
    for (line, row) in rows::<DemandRow>(text, path)? {
        let pair = OdPair::new(row.origin, row.destination, row.demand).map_err(|e| at_line(path, line, e))?;
        if pairs.iter().any(|p| p.origin == pair.origin && p.destination == pair.destination) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("OD pair ({}, {}) listed twice", pair.origin, pair.destination),
            });
        }
        pairs.push(pair);
    }
    if pairs.is_empty() {
        return Err(Error::Empty(format!("{}: no OD pairs", path.display())));
    }
    Ok(pairs)
}

/// Route file `origin,destination,route_id,link_ids` with `;`-separated link
/// ids. Routes are ordered by `route_id` within each OD pair; extra columns
/// (such as the flow columns of a results table) are ignored.
pub fn parse_routes(text: &str, path: &Path, network: &Network<f64>, pairs: &[OdPair<f64>]) -> Result<RouteSet<f64>> {
    let mut grouped: Vec<Vec<(u32, Vec<LinkId>)>> = vec![Vec::new(); pairs.len()];
    for (line, row) in rows::<RouteRow>(text, path)? {
        let k = pairs
            .iter()
            .position(|p| p.origin == row.origin && p.destination == row.destination)
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("OD pair ({}, {}) is not in the demand table", row.origin, row.destination),
            })?;
        let ids = row
            .link_ids
            .split(';')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<LinkId>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("bad link id list `{}`: {e}", row.link_ids),
            })?;
        if grouped[k].iter().any(|(id, _)| *id == row.route_id) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("route id {} repeated for OD ({}, {})", row.route_id, row.origin, row.destination),
            });
        }
        grouped[k].push((row.route_id, ids));
    }
    let entries = pairs
        .iter()
        .zip(grouped)
        .map(|(pair, mut routes)| {
            routes.sort_by_key(|(id, _)| *id);
            (*pair, routes.into_iter().map(|(_, ids)| ids).collect())
        })
        .collect();
    RouteSet::new(network, entries)
}

/// Fixed six-decimal rendering without negative zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// Six significant digits in scientific notation, for residuals.
pub fn fmt_sci(x: f64) -> String {
    format!("{x:.6e}")
}

pub fn join_ids(ids: &[LinkId]) -> String {
    ids.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";")
}

/// Links table in the input format.
pub fn links_csv(network: &Network<f64>) -> String {
    let mut out = String::from("from,to,fftt,capacity,alpha,beta\n");
    for l in network.links() {
        let _ = writeln!(out, "{},{},{},{},{},{}", l.tail, l.head, l.fftt, l.capacity, l.alpha, l.beta);
    }
    out
}

pub fn demand_csv(route_set: &RouteSet<f64>) -> String {
    let mut out = String::from("origin,destination,demand\n");
    for od in route_set.ods() {
        let _ = writeln!(out, "{},{},{}", od.pair.origin, od.pair.destination, od.pair.demand);
    }
    out
}

/// Route table in the input format (route ids are 1-based positions).
pub fn routes_csv(route_set: &RouteSet<f64>) -> String {
    let mut out = String::from("origin,destination,route_id,link_ids\n");
    for od in route_set.ods() {
        for (i, r) in od.routes.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", od.pair.origin, od.pair.destination, i + 1, join_ids(r.link_ids()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINKS: &str = "from,to,fftt,capacity,alpha,beta\n1,2,5,10,,\n2,3,4,10,0.5,2\n1,3,12,10,,\n";

    #[test]
    fn links_defaults_apply() {
        let net = parse_links(LINKS, Path::new("l.csv")).unwrap();
        assert_eq!(net.link_count(), 3);
        assert_eq!(net.link(1).unwrap().alpha, DEFAULT_ALPHA);
        assert_eq!(net.link(2).unwrap().beta, 2.0);
    }

    #[test]
    fn header_without_bpr_columns() {
        let net = parse_links("from,to,fftt,capacity\n1,2,5,10\n", Path::new("l.csv")).unwrap();
        assert_eq!(net.link(1).unwrap().beta, DEFAULT_BETA);
    }

    #[test]
    fn bad_rows_report_line() {
        let err = parse_links("from,to,fftt,capacity\n1,2,5,10\n2,3,-1,10\n", Path::new("l.csv")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            parse_links("from,to,fftt,capacity\n1,2,x,10\n", Path::new("l.csv")),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(parse_links("from,to,fftt,capacity\n", Path::new("l.csv")), Err(Error::Empty(_))));
    }

    #[test]
    fn routes_round_trip() {
        let net = parse_links(LINKS, Path::new("l.csv")).unwrap();
        let pairs = parse_demand("origin,destination,demand\n1,3,7\n", Path::new("d.csv")).unwrap();
        let rs = parse_routes(
            "origin,destination,route_id,link_ids\n1,3,2,3\n1,3,1,2;1\n",
            Path::new("r.csv"),
            &net,
            &pairs,
        )
        .unwrap();
        assert_eq!(rs.route(0).link_ids(), &[1, 2]);
        let again = parse_routes(&routes_csv(&rs), Path::new("r.csv"), &net, &pairs).unwrap();
        assert_eq!(rs, again);
    }

    #[test]
    fn routes_for_unknown_od_rejected() {
        let net = parse_links(LINKS, Path::new("l.csv")).unwrap();
        let pairs = parse_demand("origin,destination,demand\n1,3,7\n", Path::new("d.csv")).unwrap();
        assert!(parse_routes("origin,destination,route_id,link_ids\n1,2,1,1\n", Path::new("r.csv"), &net, &pairs).is_err());
    }

    #[test]
    fn six_decimals() {
        assert_eq!(fmt6(0.7719981), "0.771998");
        assert_eq!(fmt6(-1e-12), "0.000000");
    }
}
