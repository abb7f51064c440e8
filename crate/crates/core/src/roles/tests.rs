use super::*;

const WOO_LAM: &str = include_str!("../../protocols/woo_lam.proto");

fn woo_lam() -> Protocol {
    parse_protocol(WOO_LAM).unwrap()
}

#[test]
fn parses_woo_lam() {
    let p = woo_lam();
    assert_eq!(p.name, "woo-lam");
    assert_eq!(p.steps.len(), 5);
    let s3 = &p.steps[2].payload;
    let expected = Term::enc(
        Term::pair(p.atom("Nb").unwrap(), p.atom("kab").unwrap()),
        p.atom("kas").unwrap(),
    );
    assert_eq!(s3, &expected);
    assert!(p.context.intruder_knowledge().contains(&Term::Atom(p.atom("kis").unwrap())));
}

#[test]
fn empty_step_list_is_a_syntax_error() {
    let text = "protocol p\nagents A, B\nintruder I\n";
    assert!(matches!(parse_protocol(text), Err(ParseError::Syntax { .. })));
    assert!(matches!(parse_protocol(""), Err(ParseError::Syntax { .. })));
}

#[test]
fn undeclared_agent() {
    let text = "protocol p\nagents A, B\nintruder I\n1. A -> D : A\n";
    match parse_protocol(text) {
        Err(ParseError::UndeclaredIdentifier { name, line, col }) => {
            assert_eq!((name.as_str(), line, col), ("D", 4, 9));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn duplicate_step() {
    let text = "protocol p\nagents A, B\nintruder I\n1. A -> B : A\n1. B -> A : B\n";
    assert!(matches!(
        parse_protocol(text),
        Err(ParseError::DuplicateStep { index: 1, line: 5 })
    ));
}

#[test]
fn syntax_error_position() {
    let text = "protocol p\nagents A, B\nintruder I\n1. A -> B : {A\n";
    match parse_protocol(text) {
        Err(ParseError::Syntax { line, .. }) => assert_eq!(line, 4),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn level_outside_agents_is_rejected() {
    let text = "protocol p\nagents A, B\nintruder I\nnonce n\nlevel n = {A,C}\n1. A -> B : n\n";
    assert!(matches!(
        parse_protocol(text),
        Err(ParseError::UndeclaredIdentifier { .. })
    ));
}

#[test]
fn fresh_atom_must_be_sent_first_by_owner() {
    let text = "protocol p\nagents A, B\nintruder I\nnonce n\nfresh n @ A\n1. B -> A : n\n";
    assert!(matches!(parse_protocol(text), Err(ParseError::Semantic { .. })));
}

#[test]
fn printing_round_trips() {
    let p = woo_lam();
    let printed = p.to_string();
    let q = parse_protocol(&printed).unwrap();
    assert_eq!(p, q);
}

#[test]
fn asymmetric_keys_and_separators() {
    let text = "protocol pk; agents A, B; intruder I; nonce n; pubkey pb\n\
                knows B = pb^-1; level pb = bot; level pb^-1 = {B}\n\
                1. A -> B : {n.A}pb\n";
    let p = parse_protocol(text).unwrap();
    let priv_key = p.atom("pb^-1").unwrap();
    assert!(priv_key.inverse);
    assert_eq!(p.context.level_of(&priv_key).unwrap(), SecLevel::of(["B"]));
    let t = p.parse_term("dec({n}pb, pb^-1)", &[]).unwrap();
    assert_eq!(crate::term::normalize(&t).unwrap(), Term::Atom(p.atom("n").unwrap()));
}

#[test]
fn extracts_three_roles() {
    let p = woo_lam();
    let roles = extract_roles(&p);
    let owners: Vec<&str> = roles.iter().map(|r| r.owner.as_str()).collect();
    assert_eq!(owners, ["A", "B", "S"]);
    let nb = p.atom("Nb").unwrap().in_session(Session::Symbolic);
    assert_eq!(roles[1].steps[1].payload, Term::Atom(nb));
}

#[test]
fn single_message_protocol() {
    let p = parse_protocol("protocol one\nagents A, B\nintruder I\n1. A -> B : A\n").unwrap();
    let roles = extract_roles(&p);
    assert_eq!(roles.len(), 2);
    let spec = role_spec(&p);
    assert_eq!(spec.len(), 1);
    assert_eq!(spec.roles[0].id, "A_G^1");
}

#[test]
fn woo_lam_generalized_roles() {
    let p = woo_lam();
    let spec = role_spec(&p);
    let ids: Vec<&str> = spec.roles.iter().map(|g| g.id.as_str()).collect();
    assert_eq!(ids, ["A_G^1", "A_G^2", "B_G^1", "B_G^2", "B_G^3", "S_G^1"]);
    let a2 = spec.get("A_G^2").unwrap();
    assert_eq!(a2.steps[2].payload.to_string(), "{X.kab^i}kas");
    let b3 = spec.get("B_G^3").unwrap();
    assert_eq!(b3.steps[3].payload.to_string(), "{A.Y}kbs");
    assert_eq!(b3.steps[4].payload.to_string(), "{Nb^i.Z}kbs");
    let s1 = spec.get("S_G^1").unwrap();
    assert_eq!(s1.steps[0].payload.to_string(), "{A.{U.V}kas}kbs");
    assert_eq!(s1.steps[1].payload.to_string(), "{U.V}kbs");
    assert_eq!(
        a2.render_steps()[1],
        "<i.2, I(B) -> A : X>",
    );
}

#[test]
fn sent_and_received_sets() {
    let spec = role_spec(&woo_lam());
    let a1 = spec.get("A_G^1").unwrap();
    assert!(a1.received_of().is_empty());
    let a2 = spec.get("A_G^2").unwrap();
    let x = Term::Var(Var::new("X", "A_G^2"));
    assert_eq!(a2.received_of(), BTreeSet::from([x]));
    assert_eq!(a2.terminal_sent().len(), 1);
    let b2 = spec.get("B_G^2").unwrap();
    let rendered: BTreeSet<String> = b2.prior_received().iter().map(|t| t.to_string()).collect();
    assert_eq!(rendered, BTreeSet::from(["A".to_string(), "Y".to_string()]));
    let b3 = spec.get("B_G^3").unwrap();
    assert!(b3.terminal_sent().is_empty());
}

#[test]
fn variables_are_scoped_per_role() {
    let spec = role_spec(&woo_lam());
    let mut seen: BTreeSet<Var> = BTreeSet::new();
    for g in &spec.roles {
        for v in g.vars() {
            assert_eq!(v.scope, g.id);
            assert!(seen.insert(v));
        }
    }
}

#[test]
fn maximal_roles() {
    let spec = role_spec(&woo_lam());
    let ids: Vec<&str> = spec.maximal().iter().map(|g| g.id.as_str()).collect();
    assert_eq!(ids, ["A_G^2", "B_G^3", "S_G^1"]);
}

#[test]
fn var_name_sequence() {
    let mut n = VarNames::default();
    let names: Vec<String> = (0..8).map(|_| n.fresh()).collect();
    assert_eq!(names, ["X", "Y", "Z", "U", "V", "W", "X1", "Y1"]);
}
