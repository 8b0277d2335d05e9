use std::fmt::Write;

use super::RunRecord;

/// One line per final hypothesis, ordered by id:
///
/// ```text
/// H0 [class=setosa] A0 (r=0.92, cost=1.40)
/// H4 [class=virginica] ~(|[~(A1), ~(A3)]) {A1 ∧ A3} (r=0.71, cost=4.45)
/// ```
///
/// Shared subforms referenced as `@k` follow under a `where` line.
pub fn export_rules(record: &RunRecord) -> String {
    let mut rules: Vec<_> = record.summary.rules.iter().collect();
    rules.sort_by_key(|r| r.id);
    let mut out = String::new();
    for r in rules {
        write!(out, "{} [class={}] {}", r.id, r.label, r.form).unwrap();
        if let Some(a) = &r.alias {
            write!(out, " {{{a}}}").unwrap();
        }
        writeln!(out, " (r={:.2}, cost={:.2})", r.reliability, r.cost).unwrap();
    }
    if !record.summary.registry.is_empty() {
        out.push_str("where\n");
        for (k, form) in &record.summary.registry {
            writeln!(out, "  @{k} = {form}").unwrap();
        }
    }
    out
}
