use std::collections::HashMap;

use super::{complexity, subform_counts, Form, Registry};
use crate::Result;

/// Move subforms shared by two or more of `forms` into the registry.
///
/// Candidates must have complexity of at least 2. The most complex shared
/// subform is extracted first, so extracted entries are maximal; the scan
/// repeats until nothing qualifies. Reference chains never exceed the
/// registry's depth limit, which keeps evaluation unchanged.
pub fn compress(forms: &[Form], registry: &Registry) -> Result<(Vec<Form>, Registry)> {
    let mut forms = forms.to_vec();
    let mut registry = registry.clone();
    loop {
        let mut best: Option<(f64, Form)> = None;
        {
            let mut holders: HashMap<&Form, usize> = HashMap::new();
            for form in &forms {
                let mut local = HashMap::new();
                subform_counts(form, &mut local);
                for sub in local.into_keys() {
                    *holders.entry(sub).or_insert(0) += 1;
                }
            }
            for (sub, n) in holders {
                if n < 2 || matches!(sub, Form::ReEntry(_)) {
                    continue;
                }
                let c = complexity(sub, &registry)?;
                if c < 2.0 || ref_depth(sub, &registry)? + 1 > registry.max_depth() {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((bc, bf)) => c > *bc || (c == *bc && sub < bf),
                };
                if better {
                    best = Some((c, sub.clone()));
                }
            }
        }
        let Some((_, target)) = best else { break };
        let key = registry.insert(target.clone());
        for form in &mut forms {
            replace(form, &target, &Form::ReEntry(key));
        }
    }
    Ok((forms, registry))
}

/// Longest chain of registry references reachable from `form`.
fn ref_depth(form: &Form, registry: &Registry) -> Result<usize> {
    let mut deepest = 0;
    let mut keys = Vec::new();
    form.for_each_reentry(&mut |k| keys.push(k));
    for k in keys {
        deepest = deepest.max(1 + ref_depth(registry.get(k)?, registry)?);
    }
    Ok(deepest)
}

fn replace(form: &mut Form, target: &Form, with: &Form) {
    if form == target {
        *form = with.clone();
        return;
    }
    match form {
        Form::Cross(g) => replace(g, target, with),
        Form::Call(children) => children.iter_mut().for_each(|g| replace(g, target, with)),
        _ => {}
    }
}
