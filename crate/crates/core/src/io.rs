//! Delimited text formats for networks, partitions and marginals.
//!
//! Every file has a header row; lines starting with `#` are comments. Comma
//! and tab delimiters are detected from the header. Intralayer edge files may
//! open with `# shape: nodes=N layers=L`, which fixes the network size when
//! isolated nodes or empty layers would otherwise be lost.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{build_network, CouplingPreset, InterEdge, InterSpec, IntraEdge, MultilayerNetwork};
use crate::metrics::{Marginals, Partition};

/// Network size declared in a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub nodes: usize,
    pub layers: usize,
}

fn detect_delimiter(text: &str) -> u8 {
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Parses the `# shape:` comment, if any.
pub fn parse_shape(text: &str) -> Result<Option<Shape>> {
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        let Some(rest) = line.strip_prefix('#') else {
            if line.is_empty() {
                continue;
            }
            break;
        };
        let Some(spec) = rest.trim().strip_prefix("shape:") else { continue };
        let mut nodes = None;
        let mut layers = None;
        for part in spec.split_whitespace() {
            let (key, value) = part.split_once('=').ok_or_else(|| Error::Parse {
                line: k + 1,
                message: format!("malformed shape entry {part:?}"),
            })?;
            let value: usize = value.parse().map_err(|_| Error::Parse {
                line: k + 1,
                message: format!("shape value {value:?} is not a count"),
            })?;
            match key {
                "nodes" => nodes = Some(value),
                "layers" => layers = Some(value),
                _ => {}
            }
        }
        return match (nodes, layers) {
            (Some(nodes), Some(layers)) => Ok(Some(Shape { nodes, layers })),
            _ => Err(Error::Parse {
                line: k + 1,
                message: "shape comment needs nodes= and layers=".into(),
            }),
        };
    }
    Ok(None)
}

/// Records with their 1-based line numbers; the header is checked against
/// `columns` (required, then optional).
fn records(text: &str, required: &[&str], optional: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    let ok = names.len() >= required.len()
        && names.len() <= required.len() + optional.len()
        && names.iter().zip(required.iter().chain(optional)).all(|(a, b)| a.eq_ignore_ascii_case(b));
    if !ok {
        return Err(Error::Parse {
            line: header.position().map_or(1, |p| p.line() as usize),
            message: format!("expected header {:?}, got {names:?}", [required, optional].concat()),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < required.len() || rec.len() > names.len().max(required.len()) {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", names.len(), rec.len()),
            });
        }
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(line: usize, rec: &[String], k: usize, what: &str) -> Result<T> {
    rec[k].parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what} {:?} is not valid", rec[k]),
    })
}

fn weight(line: usize, rec: &[String], k: usize) -> Result<f64> {
    match rec.get(k) {
        Some(s) if !s.is_empty() => field(line, rec, k, "weight"),
        _ => Ok(1.0),
    }
}

/// Parses `layer,u,v[,weight]`.
pub fn parse_intra(text: &str) -> Result<Vec<IntraEdge>> {
    records(text, &["layer", "u", "v"], &["weight"])?
        .into_iter()
        .map(|(line, r)| {
            Ok(IntraEdge::new(
                field(line, &r, 0, "layer")?,
                field(line, &r, 1, "node")?,
                field(line, &r, 2, "node")?,
                weight(line, &r, 3)?,
            ))
        })
        .collect()
}

/// Parses `node,layer_a,layer_b[,weight]`.
pub fn parse_inter(text: &str) -> Result<Vec<InterEdge>> {
    records(text, &["node", "layer_a", "layer_b"], &["weight"])?
        .into_iter()
        .map(|(line, r)| {
            Ok(InterEdge::new(
                field(line, &r, 0, "node")?,
                field(line, &r, 1, "layer")?,
                field(line, &r, 2, "layer")?,
                weight(line, &r, 3)?,
            ))
        })
        .collect()
}

/// Parses `node,layer,community`; every node-layer must appear exactly once.
pub fn parse_partition(text: &str, n_nodes: usize, n_layers: usize) -> Result<Partition> {
    let mut labels = vec![usize::MAX; n_nodes * n_layers];
    for (line, r) in records(text, &["node", "layer", "community"], &[])? {
        let node: usize = field(line, &r, 0, "node")?;
        let layer: usize = field(line, &r, 1, "layer")?;
        let label: usize = field(line, &r, 2, "community")?;
        if node >= n_nodes || layer >= n_layers {
            return Err(Error::Parse {
                line,
                message: format!("node-layer ({node}, {layer}) outside {n_nodes}x{n_layers}"),
            });
        }
        let slot = &mut labels[node + n_nodes * layer];
        if *slot != usize::MAX {
            return Err(Error::Parse {
                line,
                message: format!("node-layer ({node}, {layer}) listed twice"),
            });
        }
        *slot = label;
    }
    if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
        return Err(Error::Parse {
            line: 0,
            message: format!(
                "node-layer ({}, {}) has no community",
                i % n_nodes.max(1),
                i / n_nodes.max(1)
            ),
        });
    }
    Ok(Partition::new(labels))
}

/// Size of a partition file: one more than the largest node and layer ids.
pub fn partition_shape(text: &str) -> Result<Shape> {
    let mut shape = Shape { nodes: 0, layers: 0 };
    for (line, r) in records(text, &["node", "layer", "community"], &[])? {
        let node: usize = field(line, &r, 0, "node")?;
        let layer: usize = field(line, &r, 1, "layer")?;
        shape.nodes = shape.nodes.max(node + 1);
        shape.layers = shape.layers.max(layer + 1);
    }
    Ok(shape)
}

/// Where interlayer coupling comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InterSource {
    Preset(CouplingPreset),
    Edges(Vec<InterEdge>),
}

/// Builds a network from parsed edges. Explicit sizes win over the shape
/// comment, which wins over the largest ids seen.
pub fn assemble_network(
    intra: &[IntraEdge],
    inter: InterSource,
    declared: Option<Shape>,
    nodes: Option<usize>,
    layers: Option<usize>,
) -> Result<MultilayerNetwork> {
    let mut seen = Shape { nodes: 0, layers: 0 };
    for e in intra {
        seen.nodes = seen.nodes.max(e.u.max(e.v) + 1);
        seen.layers = seen.layers.max(e.layer + 1);
    }
    if let InterSource::Edges(edges) = &inter {
        for e in edges {
            seen.nodes = seen.nodes.max(e.node + 1);
            seen.layers = seen.layers.max(e.layer_a.max(e.layer_b) + 1);
        }
    }
    let n_nodes = nodes.or(declared.map(|s| s.nodes)).unwrap_or(seen.nodes);
    let n_layers = layers.or(declared.map(|s| s.layers)).unwrap_or(seen.layers);
    let spec = match inter {
        InterSource::Preset(p) => InterSpec::Preset(p),
        InterSource::Edges(e) => InterSpec::Edges(e),
    };
    build_network(intra, &spec, n_nodes, n_layers)
}

/// Reads an intralayer edge file plus optional interlayer edges or preset.
pub fn load_network(
    intra_path: &Path,
    inter: Option<&Path>,
    preset: CouplingPreset,
    nodes: Option<usize>,
    layers: Option<usize>,
) -> Result<MultilayerNetwork> {
    let text = std::fs::read_to_string(intra_path)?;
    let declared = parse_shape(&text)?;
    let intra = parse_intra(&text)?;
    let source = match inter {
        Some(p) => InterSource::Edges(parse_inter(&std::fs::read_to_string(p)?)?),
        None => InterSource::Preset(preset),
    };
    assemble_network(&intra, source, declared, nodes, layers)
}

fn fmt_f64(x: f64) -> String {
    // shortest representation that round-trips
    format!("{x}")
}

/// `layer,u,v,weight` with the shape comment first.
pub fn format_intra(net: &MultilayerNetwork) -> String {
    let mut s = format!(
        "# shape: nodes={} layers={}\nlayer,u,v,weight\n",
        net.n_nodes(),
        net.n_layers()
    );
    for e in net.intra_edges() {
        let _ = writeln!(s, "{},{},{},{}", e.layer, e.u, e.v, fmt_f64(e.weight));
    }
    s
}

/// `node,layer_a,layer_b,weight`.
pub fn format_inter(net: &MultilayerNetwork) -> String {
    let mut s = String::from("node,layer_a,layer_b,weight\n");
    for e in net.inter_edges() {
        let _ = writeln!(s, "{},{},{},{}", e.node, e.layer_a, e.layer_b, fmt_f64(e.weight));
    }
    s
}

/// `node,layer,community`.
pub fn format_partition(net: &MultilayerNetwork, part: &Partition) -> String {
    let mut s = String::from("node,layer,community\n");
    for (i, &c) in part.labels().iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", net.node_of(i), net.layer_of(i), c);
    }
    s
}

/// `node,layer,p0,...,p{q-1}`.
pub fn format_marginals(net: &MultilayerNetwork, marg: &Marginals) -> String {
    let mut s = String::from("node,layer");
    for t in 0..marg.q() {
        let _ = write!(s, ",p{t}");
    }
    s.push('\n');
    for (i, row) in marg.rows().enumerate() {
        let _ = write!(s, "{},{}", net.node_of(i), net.layer_of(i));
        for &p in row {
            let _ = write!(s, ",{}", fmt_f64(p));
        }
        s.push('\n');
    }
    s
}

/// `node,layer,entropy`.
pub fn format_entropies(net: &MultilayerNetwork, entropies: &[f64]) -> String {
    let mut s = String::from("node,layer,entropy\n");
    for (i, &h) in entropies.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", net.node_of(i), net.layer_of(i), fmt_f64(h));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comma_and_tab() {
        let a = parse_intra("layer,u,v,weight\n0,0,1,2.5\n1,1,2\n").unwrap();
        let b = parse_intra("# note\nlayer\tu\tv\n0\t0\t1\n").unwrap();
        assert_eq!(a[0], IntraEdge::new(0, 0, 1, 2.5));
        assert_eq!(a[1].weight, 1.0);
        assert_eq!(b[0], IntraEdge::new(0, 0, 1, 1.0));
    }

    #[test]
    fn rejects_bad_header_and_fields() {
        assert!(matches!(parse_intra("a,b,c\n0,0,1\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_intra("layer,u,v\n0,x,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn shape_comment() {
        assert_eq!(
            parse_shape("# shape: nodes=5 layers=3\nlayer,u,v\n").unwrap(),
            Some(Shape { nodes: 5, layers: 3 })
        );
        assert_eq!(parse_shape("layer,u,v\n# shape: nodes=5 layers=3\n").unwrap(), None);
    }

    #[test]
    fn partition_must_be_complete() {
        assert!(parse_partition("node,layer,community\n0,0,1\n", 2, 1).is_err());
        let p = parse_partition("node,layer,community\n1,0,0\n0,0,3\n", 2, 1).unwrap();
        assert_eq!(p.labels(), &[3, 0]);
    }

    #[test]
    fn round_trip() {
        let net = build_network(
            &[IntraEdge::new(0, 0, 1, 0.5), IntraEdge::new(1, 1, 2, 1.0)],
            &InterSpec::Preset(CouplingPreset::Temporal),
            4,
            3,
        )
        .unwrap();
        let intra = format_intra(&net);
        let inter = format_inter(&net);
        let back = assemble_network(
            &parse_intra(&intra).unwrap(),
            InterSource::Edges(parse_inter(&inter).unwrap()),
            parse_shape(&intra).unwrap(),
            None,
            None,
        )
        .unwrap();
        assert_eq!(back, net);
    }
}
