use std::fmt::Write;

use super::ast::{DeclKind, ModelAst, Plate};

/// Render a model back to source text. The output reparses to an equal AST.
pub fn pretty_print(ast: &ModelAst) -> String {
    let mut out = String::new();
    let params: Vec<String> =
        ast.hyperparams.iter().map(|h| format!("{}: {}", h.name, h.ty.keyword())).collect();
    let _ = writeln!(out, "model({}) {{", params.join(", "));

    let mut open: Vec<&Plate> = Vec::new();
    for decl in &ast.decls {
        let common = open.iter().zip(&decl.plates).take_while(|(a, b)| **a == *b).count();
        while open.len() > common {
            open.pop();
            let _ = writeln!(out, "{}}}", indent(open.len() + 1));
        }
        for plate in &decl.plates[common..] {
            let _ = writeln!(out, "{}for {} in 0..{} {{", indent(open.len() + 1), plate.index, plate.bound);
            open.push(plate);
        }
        let rhs = match &decl.kind {
            DeclKind::Deterministic(e) => e.to_string(),
            DeclKind::Random { dist, replicate } => {
                let args: Vec<String> = dist.args.iter().map(|a| a.to_string()).collect();
                let rep = replicate.as_ref().map(|r| r.to_string()).unwrap_or_default();
                format!("{}({}).sample({rep})", dist.family.name(), args.join(", "))
            }
        };
        let _ = writeln!(out, "{}{} = {}", indent(open.len() + 1), decl.name, rhs);
    }
    while !open.is_empty() {
        open.pop();
        let _ = writeln!(out, "{}}}", indent(open.len() + 1));
    }
    if !ast.observed.is_empty() {
        let _ = writeln!(out, "  observe({})", ast.observed.join(", "));
    }
    out.push_str("}\n");
    out
}

fn indent(depth: usize) -> String {
    "  ".repeat(depth)
}
