mod common;

use imageset::model::{parse_expression, BinOp, Expr, Func, VarKind, VarRef};
use proptest::prelude::*;

#[test]
fn grammar_suite() {
    assert_eq!(common::grammar::cases().len(), 100);
    let failures = common::grammar_failures();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn builtins_match_closed_forms() {
    let worst = common::builtin_mismatch(2024);
    assert!(worst <= 1e-12, "{worst}");
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0f64..100.0).prop_map(Expr::Num),
        Just(Expr::Pi),
        (0usize..3).prop_map(|index| Expr::Var(VarRef { kind: VarKind::State, index })),
        (0usize..2).prop_map(|index| Expr::Var(VarRef { kind: VarKind::Noise, index })),
    ]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow),
        ];
        let func = prop_oneof![Just(Func::Sin), Just(Func::Exp), Just(Func::Log10), Just(Func::Abs)];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (func, inner.clone()).prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
            (op, inner.clone(), inner).prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #[test]
    fn print_then_parse_is_structural_identity(e in tree()) {
        let printed = e.to_string();
        let back = parse_expression(&printed).unwrap();
        prop_assert_eq!(back, e, "{}", printed);
    }
}
