//! Device topology files: the device count on the first line, then one row of
//! `0`/`1` entries per device (whitespace between entries is optional).

use std::path::Path;

use progmesh_core::DeviceTopology;

use crate::error::{Error, Result};

pub fn parse_topology(text: &str, path: &Path) -> Result<DeviceTopology> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let n: usize = lines
        .next()
        .ok_or_else(|| Error::parse(path, "empty topology file"))?
        .parse()
        .map_err(|_| Error::parse(path, "first line must be the device count"))?;
    let mut p2p = Vec::with_capacity(n * n);
    for row in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(path, format!("expected {n} matrix rows, found {row}")))?;
        let before = p2p.len();
        for ch in line.chars().filter(|c| !c.is_whitespace()) {
            p2p.push(match ch {
                '0' => false,
                '1' => true,
                _ => return Err(Error::parse(path, format!("row {row}: entries must be 0 or 1"))),
            });
        }
        if p2p.len() - before != n {
            return Err(Error::parse(path, format!("row {row}: expected {n} entries")));
        }
    }
    if lines.next().is_some() {
        return Err(Error::parse(path, format!("more than {n} matrix rows")));
    }
    DeviceTopology::new(n, p2p).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn load_topology(path: &Path) -> Result<DeviceTopology> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_topology(&text, path)
}

/// Groups of devices connected through peer-to-peer links, lowest index first.
pub fn reachability_classes(t: &DeviceTopology) -> Vec<Vec<usize>> {
    let n = t.n_devices();
    let mut class = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if class[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        class[start] = id;
        let mut k = 0;
        while k < members.len() {
            let a = members[k];
            for b in 0..n {
                if class[b] == usize::MAX && t.can_p2p(a, b) {
                    class[b] = id;
                    members.push(b);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

pub fn describe(t: &DeviceTopology) -> String {
    let mut s = format!("{} devices\n", t.n_devices());
    for (k, c) in reachability_classes(t).iter().enumerate() {
        let full = c.iter().all(|&a| c.iter().all(|&b| t.can_p2p(a, b)));
        let list: Vec<String> = c.iter().map(|d| d.to_string()).collect();
        s.push_str(&format!(
            "class {k}: devices {} ({})\n",
            list.join(" "),
            if full { "full p2p" } else { "partial p2p" }
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_hubs() {
        let text = "4\n1 1 0 0\n1 1 0 0\n0 0 1 1\n0 0 1 1\n";
        let t = parse_topology(text, Path::new("x")).unwrap();
        assert_eq!(t, DeviceTopology::hubs(&[2, 2]));
        assert_eq!(reachability_classes(&t), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn compact_rows() {
        let t = parse_topology("2\n11\n11\n", Path::new("x")).unwrap();
        assert!(t.can_p2p(0, 1));
    }

    #[test]
    fn rejects_bad_matrices() {
        let p = Path::new("x");
        assert!(parse_topology("2\n1 1\n0 1\n", p).unwrap_err().to_string().contains("symmetric"));
        assert!(parse_topology("2\n1 1\n", p).unwrap_err().to_string().contains("rows"));
        assert!(parse_topology("2\n1 2\n1 1\n", p).unwrap_err().to_string().contains("0 or 1"));
        assert!(parse_topology("x\n", p).is_err());
    }

    #[test]
    fn shipped_topology_has_two_hubs() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../topologies/8dev-2hub.txt");
        let t = load_topology(&path).unwrap();
        assert_eq!(t, DeviceTopology::hubs(&[4, 4]));
    }
}
