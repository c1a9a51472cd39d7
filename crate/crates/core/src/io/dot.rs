use std::fmt::Write;

use crate::graph::components;
use crate::key::Key;
use crate::model::Crossmap;

fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn source_id(key: &Key) -> String {
    quote(&format!("s:{key}"))
}

fn target_id(key: &Key) -> String {
    quote(&format!("t:{key}"))
}

/// Graphviz rendering: sources and targets on two ranks, one cluster per
/// component, split (fractional) edges dashed and labelled with their weight.
///
/// The output depends only on the canonical crossmap.
pub fn export_dot(map: &Crossmap) -> String {
    let mut out = String::new();
    out.push_str("digraph crossmap {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=box];\n");
    for (i, component) in components(map).iter().enumerate() {
        writeln!(out, "  subgraph cluster_{i} {{").unwrap();
        writeln!(
            out,
            "    label={};",
            quote(component.relation_type.as_str())
        )
        .unwrap();
        out.push_str("    { rank=same;");
        for s in &component.sources {
            write!(out, " {} [label={}];", source_id(s), quote(s.as_str())).unwrap();
        }
        out.push_str(" }\n");
        out.push_str("    { rank=same;");
        for t in &component.targets {
            write!(out, " {} [label={}];", target_id(t), quote(t.as_str())).unwrap();
        }
        out.push_str(" }\n");
        for e in &component.edges {
            write!(out, "    {} -> {}", source_id(&e.from), target_id(&e.to)).unwrap();
            if e.is_fractional() {
                write!(
                    out,
                    " [style=dashed, label={}]",
                    quote(&e.weight.to_string())
                )
                .unwrap();
            }
            out.push_str(";\n");
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_crossmap;
    use crate::model::identity_crossmap;

    const COUNTRY: &str =
        "from,to,weight\nAUS,AUS,1\nBLX,BEL,1/2\nBLX,LUX,1/2\nE.GER,DEU,1\nW.GER,DEU,1\n";

    #[test]
    fn country_clusters() {
        let map = read_crossmap(COUNTRY.as_bytes()).unwrap().unwrap();
        let dot = export_dot(&map);
        assert_eq!(dot.matches("subgraph cluster_").count(), 3);
        assert!(dot.contains("\"s:BLX\" -> \"t:BEL\" [style=dashed, label=\"1/2\"];"));
        assert!(dot.contains("\"s:BLX\" -> \"t:LUX\" [style=dashed, label=\"1/2\"];"));
        assert!(dot.contains("\"s:E.GER\" -> \"t:DEU\";"));
        assert!(dot.contains("\"s:AUS\" -> \"t:AUS\";"));
        assert_eq!(dot, export_dot(&map));
    }

    #[test]
    fn identity_edges_are_solid() {
        let map = identity_crossmap(["a", "b"].map(|s| Key::new(s).unwrap())).unwrap();
        let dot = export_dot(&map);
        assert!(!dot.contains("dashed"));
        assert!(!dot.contains("label=\"1\""));
    }

    #[test]
    fn quotes_are_escaped() {
        let map = read_crossmap("from,to,weight\n\"a\"\"b\",c\\d,1\n".as_bytes())
            .unwrap()
            .unwrap();
        let dot = export_dot(&map);
        assert!(dot.contains(r#""s:a\"b" [label="a\"b"]"#), "{dot}");
        assert!(dot.contains(r#""t:c\\d""#), "{dot}");
    }
}
