//! Pauli products, concatenation, symmetrization and the standard families.

use ddseq::sequences::{concatenate, make_family, Alphabet, Family, Gate, GateSequence, PauliWord};
use ddseq::Result;

fn main() -> Result<()> {
    let x = PauliWord::from_gate(Gate::X);
    let y = PauliWord::from_gate(Gate::Y);
    let xy = x.multiply(y);
    println!("X·Y = i^{} {}", xy.phase(), Alphabet::Pauli.symbol(xy.base()));

    let outer = GateSequence::pauli("XX");
    let inner = GateSequence::pauli("XYXY");
    println!("XX[XYXY] = {}", concatenate(&outer, &inner)?);

    for family in Family::ALL {
        let members = make_family(family, None)?;
        println!("{:>6}: {} members of length {}, first {}", family.name(), members.len(), family.length(), members[0]);
    }

    let half = GateSequence::pauli("XYXY");
    let full = half.symmetrize()?;
    println!("symmetrized {half} -> {full}");
    assert_eq!(full.first_half()?, half);
    Ok(())
}
