use crate::corpus::{Atom, LatentAtoms};

/// Separator between consecutive actions in canonical text.
pub const ACTION_SEPARATOR: &str = "→";

/// Canonical tokens of one action in slot order: verb, object, limb,
/// direction, then `<n>times` when the action repeats.
pub fn atom_tokens(atom: &Atom) -> Vec<String> {
    let mut out = vec![atom.verb.clone()];
    for slot in [&atom.object, &atom.limb, &atom.direction].into_iter().flatten() {
        out.extend(slot.split_whitespace().map(str::to_owned));
    }
    if let Some(n) = atom.repetition.filter(|&n| n > 1) {
        out.push(format!("{n}times"));
    }
    out
}

/// Renders ground-truth latents as canonical text, actions joined by ` → `.
pub fn canon_oracle(latents: &LatentAtoms) -> String {
    latents
        .atoms
        .iter()
        .map(|a| atom_tokens(a).join(" "))
        .collect::<Vec<_>>()
        .join(&format!(" {ACTION_SEPARATOR} "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_action() {
        let l = LatentAtoms::new(vec![Atom::verb("walk").with_direction("forward")]);
        assert_eq!(canon_oracle(&l), "walk forward");
    }

    #[test]
    fn action_sequence() {
        let l = LatentAtoms::new(vec![
            Atom::verb("walk").with_direction("forward"),
            Atom::verb("turn").with_direction("around"),
        ]);
        assert_eq!(canon_oracle(&l), "walk forward → turn around");
    }

    #[test]
    fn slot_order_and_repetition() {
        let l = LatentAtoms::new(vec![Atom::verb("raise").with_limb("right arm").with_repetition(2)]);
        assert_eq!(canon_oracle(&l), "raise right arm 2times");
        let l = LatentAtoms::new(vec![Atom::verb("throw")
            .with_direction("left")
            .with_limb("right hand")
            .with_object("ball")
            .with_repetition(1)]);
        assert_eq!(canon_oracle(&l), "throw ball right hand left");
    }
}
