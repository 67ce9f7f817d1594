"""Export core Hamiltonian and overlap matrices in the fermicool dense format.

Requires pyscf. Example:

    python3 tools/export_pyscf_matrices.py --atom "H 0 0 0; F 0 0 0.917" \
        --basis 6-31g --prefix data/hf_631g
"""
import argparse

import numpy as np
from pyscf import gto


def write_matrix(path, m, comment):
    with open(path, "w", newline="\n") as f:
        for line in comment:
            f.write(f"# {line}\n")
        f.write(f"{m.shape[0]} {m.shape[1]}\n")
        for row in m:
            f.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--atom", required=True)
    ap.add_argument("--basis", default="6-31g")
    ap.add_argument("--unit", default="Angstrom")
    ap.add_argument("--prefix", required=True)
    args = ap.parse_args()

    mol = gto.M(atom=args.atom, basis=args.basis, unit=args.unit)
    hcore = mol.intor("int1e_kin") + mol.intor("int1e_nuc")
    s = mol.intor("int1e_ovlp")
    hcore = 0.5 * (hcore + hcore.T)
    s = 0.5 * (s + s.T)
    info = [f"atom: {args.atom}", f"basis: {args.basis} ({args.unit})", "units: hartree"]
    write_matrix(f"{args.prefix}_hcore.mat", hcore, ["core Hamiltonian T + V_nuc"] + info)
    write_matrix(f"{args.prefix}_overlap.mat", s, ["overlap matrix"] + info)
    print(f"dim={hcore.shape[0]} min_overlap_eig={np.linalg.eigvalsh(s).min():.6g}")


if __name__ == "__main__":
    main()
