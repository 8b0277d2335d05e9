use super::Form;

/// Canonical text: `0`, `()`, `A<i>`, `~(f)`, `|[f, g, ...]`, `@<k>`.
pub fn render(form: &Form) -> String {
    let mut out = String::new();
    write_form(form, &mut out);
    out
}

fn write_form(form: &Form, out: &mut String) {
    match form {
        Form::Void => out.push('0'),
        Form::Mark => out.push_str("()"),
        Form::Atom(id) => {
            out.push('A');
            out.push_str(&id.0.to_string());
        }
        Form::Cross(g) => {
            out.push_str("~(");
            write_form(g, out);
            out.push(')');
        }
        Form::Call(children) => {
            out.push_str("|[");
            for (i, g) in children.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_form(g, out);
            }
            out.push(']');
        }
        Form::ReEntry(k) => {
            out.push('@');
            out.push_str(&k.0.to_string());
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Or,
    And,
    Not,
    Leaf,
}

/// Boolean reading of a form using ∧, ∨ and ¬, for crossed and called
/// forms. Plain leaves have no alias.
pub fn alias(form: &Form) -> Option<String> {
    match form {
        Form::Cross(_) | Form::Call(_) => Some(lit(form).0),
        _ => None,
    }
}

fn wrap((s, p): (String, Prec), min: Prec) -> String {
    if p < min {
        format!("({s})")
    } else {
        s
    }
}

fn lit(form: &Form) -> (String, Prec) {
    match form {
        Form::Void => ("⊥".into(), Prec::Leaf),
        Form::Mark => ("⊤".into(), Prec::Leaf),
        Form::Atom(id) => (format!("A{}", id.0), Prec::Leaf),
        Form::ReEntry(k) => (format!("@{}", k.0), Prec::Leaf),
        Form::Cross(g) => match g.as_ref() {
            Form::Cross(h) => lit(h),
            // ~|[a, b] is ¬a ∧ ¬b
            Form::Call(children) if children.len() > 1 => {
                let parts: Vec<String> = children
                    .iter()
                    .map(|c| wrap(negated(c), Prec::And))
                    .collect();
                (parts.join(" ∧ "), Prec::And)
            }
            _ => negated(g),
        },
        Form::Call(children) => {
            if children.len() == 1 {
                return lit(&children[0]);
            }
            let parts: Vec<String> = children.iter().map(|c| wrap(lit(c), Prec::Or)).collect();
            (parts.join(" ∨ "), Prec::Or)
        }
    }
}

fn negated(form: &Form) -> (String, Prec) {
    match form {
        Form::Cross(h) => lit(h),
        Form::Void => ("⊤".into(), Prec::Leaf),
        Form::Mark => ("⊥".into(), Prec::Leaf),
        _ => (format!("¬{}", wrap(lit(form), Prec::Not)), Prec::Not),
    }
}
