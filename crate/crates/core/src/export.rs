//! File formats for networks and their measures.
//!
//! Every floating-point field is written with 17 significant digits so a
//! re-parse recovers the exact `f64`. NaN is written as `NaN`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::multinet::{k_coreness, node_strength, LayerMatrix, MultilayerNetwork};

const EDGE_HEADER: [&str; 7] = [
    "src_entity",
    "src_layer",
    "dst_entity",
    "dst_layer",
    "weight",
    "p_value",
    "kept",
];
const NODE_HEADER: [&str; 4] = ["entity", "layer", "strength", "coreness"];

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents)?;
    Ok(())
}

/// Per-node measures, indexed `[entity][layer]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMeasures {
    pub strength: Vec<Vec<f64>>,
    pub coreness: Vec<Vec<usize>>,
}

impl NodeMeasures {
    pub fn compute(net: &MultilayerNetwork) -> Self {
        NodeMeasures {
            strength: node_strength(net),
            coreness: k_coreness(net),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkFormat {
    EdgeCsv,
    GraphMl,
    Dot,
}

impl NetworkFormat {
    pub fn extension(self) -> &'static str {
        match self {
            NetworkFormat::EdgeCsv => "csv",
            NetworkFormat::GraphMl => "graphml",
            NetworkFormat::Dot => "dot",
        }
    }
}

pub fn export_network(net: &MultilayerNetwork, format: NetworkFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match format {
        NetworkFormat::EdgeCsv => write_file(path, &edge_csv_bytes(net)?),
        NetworkFormat::GraphMl => write_file(path, graphml_string(net, &NodeMeasures::compute(net)).as_bytes()),
        NetworkFormat::Dot => write_file(path, dot_string(net, &NodeMeasures::compute(net)).as_bytes()),
    }
}

/// Every edge of every block, blocks in `(from_layer, to_layer)` order and
/// edges row-major inside each block.
pub fn edge_csv_bytes(net: &MultilayerNetwork) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EDGE_HEADER).map_err(csv_err)?;
    let (n, l) = (net.n_entities(), net.n_layers());
    let (ents, lays) = (net.entity_labels(), net.layer_labels());
    for j in 0..l {
        for m in 0..l {
            for i in 0..n {
                for k in 0..n {
                    w.write_record([
                        ents[i].as_str(),
                        lays[j].as_str(),
                        ents[k].as_str(),
                        lays[m].as_str(),
                        &fmt_f64(net.weight(j, m, i, k)),
                        &fmt_f64(net.p_value(j, m, i, k)),
                        if net.is_kept(j, m, i, k) { "true" } else { "false" },
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn read_edge_csv(path: impl AsRef<Path>) -> Result<MultilayerNetwork> {
    let path = path.as_ref();
    parse_edge_csv(std::fs::File::open(path)?, &path.display().to_string())
}

/// Inverse of [`edge_csv_bytes`]; label order is recovered from first appearance.
pub fn parse_edge_csv(reader: impl std::io::Read, source: &str) -> Result<MultilayerNetwork> {
    let data_err = |row: usize, msg: String| Error::Data {
        path: source.to_string(),
        row,
        msg,
    };
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
    if headers.iter().ne(EDGE_HEADER.iter().copied()) {
        return Err(data_err(1, format!("header must be `{}`", EDGE_HEADER.join(","))));
    }

    struct Row {
        src: String,
        src_layer: String,
        dst: String,
        dst_layer: String,
        weight: f64,
        p_value: f64,
        kept: bool,
    }
    let mut rows = Vec::new();
    let mut entities: Vec<String> = Vec::new();
    let mut layers: Vec<String> = Vec::new();
    let note = |labels: &mut Vec<String>, s: &str| {
        if !labels.iter().any(|x| x == s) {
            labels.push(s.to_string());
        }
    };
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| data_err(row, e.to_string()))?;
        let num = |idx: usize| -> Result<f64> {
            f64::from_str(&rec[idx]).map_err(|_| data_err(row, format!("non-numeric {:?}", &rec[idx])))
        };
        let kept = match &rec[6] {
            "true" => true,
            "false" => false,
            other => return Err(data_err(row, format!("kept must be true or false, found {other:?}"))),
        };
        note(&mut entities, &rec[0]);
        note(&mut entities, &rec[2]);
        note(&mut layers, &rec[1]);
        note(&mut layers, &rec[3]);
        rows.push(Row {
            src: rec[0].to_string(),
            src_layer: rec[1].to_string(),
            dst: rec[2].to_string(),
            dst_layer: rec[3].to_string(),
            weight: num(4)?,
            p_value: num(5)?,
            kept,
        });
    }

    let (n, l) = (entities.len(), layers.len());
    if rows.len() != n * n * l * l {
        return Err(data_err(
            0,
            format!("{} edges do not cover {n} entities × {l} layers", rows.len()),
        ));
    }
    let pos = |labels: &[String], s: &str| labels.iter().position(|x| x == s).expect("label noted");
    let mut weights = vec![vec![0.0; n * n]; l * l];
    let mut kept = vec![vec![false; n * n]; l * l];
    let mut p_values = vec![vec![f64::NAN; n * n]; l * l];
    let mut seen = vec![vec![false; n * n]; l * l];
    for (r, row) in rows.iter().enumerate() {
        let b = pos(&layers, &row.src_layer) * l + pos(&layers, &row.dst_layer);
        let e = pos(&entities, &row.src) * n + pos(&entities, &row.dst);
        if std::mem::replace(&mut seen[b][e], true) {
            return Err(data_err(r + 2, "duplicate edge".into()));
        }
        weights[b][e] = row.weight;
        kept[b][e] = row.kept;
        p_values[b][e] = row.p_value;
    }
    MultilayerNetwork::from_parts(entities, layers, weights, kept, p_values)
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Node ids are `n{entity}_{layer}`; only kept edges are emitted.
pub fn graphml_string(net: &MultilayerNetwork, measures: &NodeMeasures) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str(
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" \
         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
         xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns \
         http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n",
    );
    for (id, target, name, ty) in [
        ("d0", "node", "entity", "string"),
        ("d1", "node", "layer", "string"),
        ("d2", "node", "strength", "double"),
        ("d3", "node", "coreness", "int"),
        ("d4", "edge", "weight", "double"),
        ("d5", "edge", "p_value", "double"),
    ] {
        let _ = writeln!(
            s,
            "  <key id=\"{id}\" for=\"{target}\" attr.name=\"{name}\" attr.type=\"{ty}\"/>"
        );
    }
    s.push_str("  <graph id=\"multilayer\" edgedefault=\"directed\">\n");
    let (n, l) = (net.n_entities(), net.n_layers());
    for i in 0..n {
        for j in 0..l {
            let _ = writeln!(s, "    <node id=\"n{i}_{j}\">");
            let _ = writeln!(
                s,
                "      <data key=\"d0\">{}</data>",
                xml_escape(&net.entity_labels()[i])
            );
            let _ = writeln!(
                s,
                "      <data key=\"d1\">{}</data>",
                xml_escape(&net.layer_labels()[j])
            );
            let _ = writeln!(s, "      <data key=\"d2\">{}</data>", fmt_f64(measures.strength[i][j]));
            let _ = writeln!(s, "      <data key=\"d3\">{}</data>", measures.coreness[i][j]);
            s.push_str("    </node>\n");
        }
    }
    for (e, (j, m, i, k, w)) in net.kept_edges().enumerate() {
        let _ = writeln!(s, "    <edge id=\"e{e}\" source=\"n{i}_{j}\" target=\"n{k}_{m}\">");
        let _ = writeln!(s, "      <data key=\"d4\">{}</data>", fmt_f64(w));
        let _ = writeln!(s, "      <data key=\"d5\">{}</data>", fmt_f64(net.p_value(j, m, i, k)));
        s.push_str("    </edge>\n");
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// One `cluster_` subgraph per layer holding its nodes; edges follow at top level.
pub fn dot_string(net: &MultilayerNetwork, measures: &NodeMeasures) -> String {
    let (n, l) = (net.n_entities(), net.n_layers());
    let node_id = |i: usize, j: usize| dot_quote(&format!("{}@{}", net.entity_labels()[i], net.layer_labels()[j]));
    let mut s = String::from("digraph multilayer {\n");
    for j in 0..l {
        let _ = writeln!(s, "  subgraph {} {{", dot_quote(&format!("cluster_{j}")));
        let _ = writeln!(s, "    label={};", dot_quote(&net.layer_labels()[j]));
        for i in 0..n {
            let _ = writeln!(
                s,
                "    {} [label={}, layer={}, strength=\"{}\", coreness={}];",
                node_id(i, j),
                dot_quote(&net.entity_labels()[i]),
                dot_quote(&net.layer_labels()[j]),
                fmt_f64(measures.strength[i][j]),
                measures.coreness[i][j]
            );
        }
        s.push_str("  }\n");
    }
    for (j, m, i, k, w) in net.kept_edges() {
        let _ = writeln!(
            s,
            "  {} -> {} [weight=\"{}\", p_value=\"{}\"];",
            node_id(i, j),
            node_id(k, m),
            fmt_f64(w),
            fmt_f64(net.p_value(j, m, i, k))
        );
    }
    s.push_str("}\n");
    s
}

/// Square CSV with a `layer` corner cell, layer labels across and down.
pub fn layer_matrix_bytes(matrix: &LayerMatrix, layer_labels: &[String]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["layer".to_string()];
    header.extend(layer_labels.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (label, row) in layer_labels.iter().zip(&matrix.values) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Parses a matrix written by [`layer_matrix_bytes`] into `(labels, values)`.
pub fn read_layer_matrix(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let labels: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .skip(1)
        .map(String::from)
        .collect();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .skip(1)
            .map(|v| {
                f64::from_str(v).map_err(|_| Error::Data {
                    path: source.clone(),
                    row: i + 2,
                    msg: format!("non-numeric {v:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    if values.len() != labels.len() || values.iter().any(|r| r.len() != labels.len()) {
        return Err(Error::Data {
            path: source,
            row: 0,
            msg: "matrix is not square".into(),
        });
    }
    Ok((labels, values))
}

/// Long-format `entity,layer,strength,coreness`, entity-major.
pub fn node_measures_bytes(net: &MultilayerNetwork, measures: &NodeMeasures) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(NODE_HEADER).map_err(csv_err)?;
    for (i, e) in net.entity_labels().iter().enumerate() {
        for (j, l) in net.layer_labels().iter().enumerate() {
            w.write_record([
                e.as_str(),
                l.as_str(),
                &fmt_f64(measures.strength[i][j]),
                &measures.coreness[i][j].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Parsed rows of a node-measure CSV: `(entity, layer, strength, coreness)`.
pub fn read_node_measures(path: impl AsRef<Path>) -> Result<Vec<(String, String, f64, usize)>> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |msg: String| Error::Data {
            path: source.clone(),
            row: i + 2,
            msg,
        };
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", rec.len())));
        }
        let strength = f64::from_str(&rec[2]).map_err(|_| bad(format!("non-numeric {:?}", &rec[2])))?;
        let core = usize::from_str(&rec[3]).map_err(|_| bad(format!("non-integer {:?}", &rec[3])))?;
        out.push((rec[0].to_string(), rec[1].to_string(), strength, core));
    }
    Ok(out)
}

/// Writes `assortativity.csv`, `overlap.csv` and `nodes.csv` into `dir`.
pub fn export_matrices(
    net: &MultilayerNetwork,
    assortativity: &LayerMatrix,
    overlap: &LayerMatrix,
    measures: &NodeMeasures,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    write_file(
        &dir.join("assortativity.csv"),
        &layer_matrix_bytes(assortativity, net.layer_labels())?,
    )?;
    write_file(
        &dir.join("overlap.csv"),
        &layer_matrix_bytes(overlap, net.layer_labels())?,
    )?;
    write_file(&dir.join("nodes.csv"), &node_measures_bytes(net, measures)?)?;
    Ok(())
}
