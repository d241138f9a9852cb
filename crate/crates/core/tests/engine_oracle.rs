use std::collections::BTreeSet;

use consentry_core::engine::{decide_site, eval_atom, evaluate, DecisionCache, OverrideStore};
use consentry_core::rules::{Atom, Condition, Rule, StmtPred};
use consentry_core::{
    base_schema, Action, Origin, Preset, PrivacyPolicy, Purpose, Recipient, Retention, RuleSet,
};
use consentry_testkit::gen;
use consentry_testkit::oracle::Table;
use consentry_testkit::space::{form, grid, predicates, single, two_by_two, PATHS};
use proptest::prelude::*;

fn check_space(policies: &[PrivacyPolicy], preds: &[StmtPred]) -> usize {
    let schema = base_schema();
    let table = Table::new(&schema);
    let mut n = 0;
    for p in policies {
        for pred in preds {
            for atom in [Atom::AnyStatement(pred.clone()), Atom::AllStatements(pred.clone())] {
                assert_eq!(
                    eval_atom(p, &atom, &schema),
                    table.atom(p, &atom),
                    "{atom} on\n{}",
                    p.to_text()
                );
                n += 1;
            }
        }
        for preset in Preset::ALL {
            let d = evaluate(p, &preset.ruleset(), &schema);
            let (action, fired, _) = table.decide(p, &preset.ruleset());
            assert_eq!((d.action, d.fired_rule.to_string()), (action, fired));
        }
    }
    n
}

#[test]
fn exhaustive_two_by_two_by_two_by_two() {
    let (policies, preds) = two_by_two();
    assert_eq!(policies.len(), 16);
    let forms: BTreeSet<&str> = preds.iter().map(form).collect();
    assert_eq!(forms.len(), 9);
    let n = check_space(&policies, &preds);
    assert_eq!(n, 16 * preds.len() * 2);
}

#[test]
fn sixty_four_single_statement_policies() {
    let purposes = [Purpose::Research, Purpose::Profiling];
    let recipients = [Recipient::Agents, Recipient::Public];
    let retentions = [Retention::None, Retention::LegalRequirement];
    let data = [
        "user.name", "user.name.family", "user.home-info", "user.bday", "dynamic",
        "dynamic.clickstream", "user.business-info.online", "user.gender",
    ];
    let policies = grid(&purposes, &recipients, &retentions, &data);
    assert_eq!(policies.len(), 64);
    check_space(&policies, &predicates(&purposes, &recipients, &retentions, PATHS));
}


#[test]
fn empty_policy_quantifiers_are_vacuous() {
    let schema = base_schema();
    let mut p = single(Purpose::Research, Recipient::Ours, Retention::None, "user");
    p.statements.clear();
    for pred in predicates(&[Purpose::Research], &[Recipient::Ours], &[Retention::None], PATHS) {
        assert!(!eval_atom(&p, &Atom::AnyStatement(pred.clone()), &schema));
        assert!(eval_atom(&p, &Atom::AllStatements(pred), &schema));
    }
}

fn truth(t: bool) -> Condition {
    // generated seal names never contain NUL
    let a = Condition::Atom(Atom::Policy(consentry_core::rules::PolicyPred::HasSeal("\u{0}-never".into())));
    if t {
        Condition::negate(a)
    } else {
        a
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn engine_agrees_with_oracle(p in gen::policy(), r in gen::ruleset()) {
        let schema = base_schema();
        let table = Table::new(&schema);
        let d = evaluate(&p, &r, &schema);
        let (action, fired, explanation) = table.decide(&p, &r);
        prop_assert_eq!(d.action, action);
        prop_assert_eq!(d.fired_rule.to_string(), fired);
        prop_assert_eq!(d.explanation, explanation);
        for rule in &r.rules {
            for atom in rule.condition.atoms() {
                prop_assert_eq!(eval_atom(&p, atom, &schema), table.atom(&p, atom));
            }
        }
    }

    #[test]
    fn first_match_laws(p in gen::policy(), r in gen::ruleset(), a in gen::action()) {
        let schema = base_schema();
        let base = evaluate(&p, &r, &schema);

        let mut never = r.clone();
        never.rules.insert(0, Rule { action: a, condition: truth(false), explanation: None });
        prop_assert_eq!(evaluate(&p, &never, &schema).action, base.action);

        let mut always = r.clone();
        always.rules.insert(0, Rule { action: a, condition: truth(true), explanation: None });
        let d = evaluate(&p, &always, &schema);
        prop_assert_eq!(d.action, a);
        prop_assert_eq!(d.fired_rule.to_string(), "1");
    }

    #[test]
    fn dropping_a_statement_is_monotone(p in gen::policy(), pred in gen::stmt_pred(), idx in any::<prop::sample::Index>()) {
        prop_assume!(!p.statements.is_empty());
        let schema = base_schema();
        let mut q = p.clone();
        q.statements.remove(idx.index(p.statements.len()));
        let any = Atom::AnyStatement(pred.clone());
        let all = Atom::AllStatements(pred);
        prop_assert!(!eval_atom(&q, &any, &schema) || eval_atom(&p, &any, &schema));
        prop_assert!(eval_atom(&q, &all, &schema) || !eval_atom(&p, &all, &schema));
    }

    #[test]
    fn evaluation_is_deterministic(p in gen::policy(), r in gen::ruleset()) {
        let schema = base_schema();
        let a = evaluate(&p, &r, &schema);
        let b = evaluate(&p, &r, &schema);
        prop_assert_eq!((a.action, a.fired_rule, a.explanation, a.policy_hash), (b.action, b.fired_rule, b.explanation, b.policy_hash));
    }

    #[test]
    fn cache_is_transparent(p in gen::policy(), r in gen::ruleset()) {
        let schema = base_schema();
        let origin: Origin = "https://site.example".parse().unwrap();
        let mut cache = DecisionCache::default();
        let expected = evaluate(&p, &r, &schema).action;
        for _ in 0..2 {
            let d = decide_site(&origin, Some(&p), &r, &schema, &OverrideStore::new(), &mut cache);
            prop_assert_eq!(d.action, expected);
        }
    }
}

#[test]
fn default_applies_when_nothing_matches() {
    let schema = base_schema();
    let p = single(Purpose::CoreService, Recipient::Ours, Retention::None, "user.name");
    let r = RuleSet {
        name: "r".into(),
        rules: vec![Rule { action: Action::Block, condition: truth(false), explanation: None }],
        default_action: Action::Inform,
        on_missing_policy: Action::Warn,
    };
    let d = evaluate(&p, &r, &schema);
    assert_eq!(d.action, Action::Inform);
    assert_eq!(d.fired_rule.to_string(), "default");
}
