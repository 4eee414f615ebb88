use bayesc_core::dsl::{parse_model, pretty_print, validate_model, DeclKind, IndexUse, ParseError};
use bayesc_core::{compile_model, zoo};

#[test]
fn every_fixture_round_trips() {
    for (name, src) in zoo::ALL {
        let ast = parse_model(src).unwrap();
        let printed = pretty_print(&ast);
        let again = parse_model(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert_eq!(ast, again, "{name}");
        assert_eq!(pretty_print(&again), printed, "{name}");
        validate_model(&ast).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn parsing_is_deterministic() {
    for (_, src) in zoo::ALL {
        assert_eq!(parse_model(src).unwrap(), parse_model(src).unwrap());
    }
}

#[test]
fn lda_structure() {
    let ast = parse_model(zoo::LDA).unwrap();
    let det: Vec<&str> =
        ast.decls.iter().filter(|d| matches!(d.kind, DeclKind::Deterministic(_))).map(|d| d.name.as_str()).collect();
    let random: Vec<&str> = ast.random_decls().map(|d| d.name.as_str()).collect();
    assert_eq!(det, ["a", "b"]);
    assert_eq!(random, ["theta", "phi", "z", "w"]);
    assert_eq!(ast.observed, ["w"]);
}

#[test]
fn minimal_model() {
    let ast = parse_model("model(N:int){ x = Gaussian(0,1).sample(N); observe(x) }").unwrap();
    assert_eq!(ast.decls.len(), 1);
    assert_eq!(ast.observed, ["x"]);
}

#[test]
fn unknown_family() {
    let err = parse_model("model(){ x = Frobnitz(1).sample() }").unwrap_err();
    assert!(matches!(err, ParseError::UnknownFamily { .. }));
    assert!(err.to_string().contains("unknown distribution family"));
}

#[test]
fn undefined_name() {
    let err = compile_model("model(){ x = Gaussian(q, 1).sample() }").unwrap_err();
    assert!(err.to_string().contains("undefined name q"), "{err}");
}

#[test]
fn categorical_indexing_is_recorded() {
    let uses = |src: &str| compile_model(src).unwrap().categorical_indexing;
    let iu = |a: &str, b: &str| IndexUse { index_var: a.into(), indexed: b.into() };
    assert_eq!(uses(zoo::LDA), [iu("z", "phi")]);
    let gmm = uses(zoo::GMM);
    assert!(gmm.contains(&iu("z", "mu")) && gmm.contains(&iu("z", "sigma")));
}

#[test]
fn multiple_observations() {
    let m = compile_model(zoo::REGRESSION).unwrap();
    let observed: Vec<&str> = m.vars.iter().filter(|v| v.observed).map(|v| v.name.as_str()).collect();
    assert_eq!(observed, ["x", "y"]);
}
