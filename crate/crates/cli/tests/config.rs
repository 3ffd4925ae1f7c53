use proptest::prelude::*;
use qvlab_cli::{ConfigError, RunConfig, Subcommand};

#[test]
fn canonical_form_is_stable() {
    let text = "format = json\nn=128:8192:x2\n# comment\n\nhurst=0.550\nmodel=fbm\nsubcommand=rates\nuse=m_stat\n";
    let cfg = RunConfig::parse(text).unwrap();
    assert_eq!(cfg.subcommand, Subcommand::Rates);
    assert_eq!(cfg.n_list.as_ref().unwrap().0.len(), 7);
    let canon = cfg.serialize();
    assert_eq!(canon, "subcommand=rates\nmodel=fbm\nhurst=0.55\nn-list=128:8192:x2\nuse=m_stat\nformat=json\n");
    let again = RunConfig::parse(&canon).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(again.serialize(), canon);
}

#[test]
fn comma_lists_that_double_canonicalize_to_ranges() {
    let cfg = RunConfig::parse("subcommand=cumulants\nmodel=fbm\nhurst=0.3\nn-list=16,32,64\n").unwrap();
    assert!(cfg.serialize().contains("n-list=16:64:x2\n"));
    let cfg = RunConfig::parse("subcommand=cumulants\nmodel=fbm\nhurst=0.3\nn-list=10,30\n").unwrap();
    assert!(cfg.serialize().contains("n-list=10,30\n"));
}

#[test]
fn malformed_configs_are_rejected() {
    assert!(matches!(RunConfig::parse("model fbm"), Err(ConfigError::Syntax { line: 1, .. })));
    assert!(matches!(RunConfig::parse("colour=red"), Err(ConfigError::UnknownKey(_))));
    assert!(matches!(RunConfig::parse("n=1\nn-list=2"), Err(ConfigError::DuplicateKey(_))));
    assert!(matches!(RunConfig::parse("model=fbm\nhurst=0.5"), Err(ConfigError::Missing("subcommand"))));
    assert!(matches!(
        RunConfig::parse("subcommand=rates\nmodel=subfbm\nhurst=0.5\nk=1"),
        Err(ConfigError::Conflict(_))
    ));
    assert!(matches!(RunConfig::parse("subcommand=rates\nmodel=fbm\nhurst=x"), Err(ConfigError::Value { .. })));
    assert!(matches!(
        RunConfig::parse("subcommand=rates\nmodel=fbm\nhurst=0.5\nraw=a.bin"),
        Err(ConfigError::Conflict(_))
    ));
}

fn arb_config_text() -> impl Strategy<Value = String> {
    let model = prop_oneof![
        (prop_oneof![Just("fbm"), Just("subfbm")], 0.01f64..0.99).prop_map(|(m, h)| format!("model={m}\nhurst={h}\n")),
        (prop_oneof![Just("bifbm"), Just("gsfbm")], 0.01f64..0.99, 0.1f64..1.9)
            .prop_map(|(m, hp, k)| format!("model={m}\nhp={hp}\nk={k}\n")),
        (0.01f64..0.99).prop_map(|h| format!("model=tabulated\nhurst={h}\ngrid=/tmp/g.csv\n")),
    ];
    let sub = prop_oneof![Just("cumulants"), Just("rates"), Just("asclt"), Just("hypothesis")];
    let nlist = prop_oneof![
        (1usize..100, 0u32..8).prop_map(|(a, k)| format!("n-list={a}:{}:x2\n", a << k)),
        prop::collection::vec(1usize..5000, 1..5).prop_map(|v| {
            let s: Vec<String> = v.iter().map(|n| n.to_string()).collect();
            format!("n={}\n", s.join(","))
        }),
        Just(String::new()),
    ];
    let extras = (
        prop::option::of(1usize..100_000),
        prop::option::of(any::<u64>()),
        prop::option::of(prop_oneof![Just("kappa3"), Just("kappa4"), Just("m_stat"), Just("ks")]),
        prop::option::of(prop_oneof![Just("one"), Just("indicator_le_zero"), Just("cos")]),
        prop::option::of(prop_oneof![Just("csv"), Just("json")]),
        prop::option::of(1usize..64),
    );
    (sub, model, nlist, extras).prop_map(|(sub, model, nlist, (reps, seed, use_, phi, fmt, threads))| {
        let mut s = format!("subcommand={sub}\n{model}{nlist}");
        if let Some(r) = reps {
            s += &format!("reps={r}\n");
        }
        if let Some(v) = seed {
            s += &format!("seed={v}\n");
        }
        if let Some(u) = use_ {
            s += &format!("use={u}\n");
        }
        if let Some(p) = phi {
            s += &format!("phi={p}\n");
        }
        if let Some(f) = fmt {
            s += &format!("format={f}\n");
        }
        if let Some(t) = threads {
            s += &format!("threads={t}\nout=/tmp/o.txt\n");
        }
        s
    })
}

proptest! {
    #[test]
    fn serialize_parse_round_trip(text in arb_config_text()) {
        let cfg = RunConfig::parse(&text).unwrap();
        let canon = cfg.serialize();
        let back = RunConfig::parse(&canon).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.serialize(), canon);
    }
}
