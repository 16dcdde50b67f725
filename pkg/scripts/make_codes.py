"""Write the BCH parity-check matrices used in the experiments to codes/*.alist."""

import argparse
from pathlib import Path

from activedecode.code import bch_code, to_alist

CODES = [(63, 45, 3), (63, 36, 5), (127, 64, 10)]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=Path(__file__).resolve().parent.parent / "codes")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for n, k, t in CODES:
        code = bch_code(n, k, t)
        path = out / f"{code.name}.alist"
        path.write_text(to_alist(code))
        print(f"{path}: {code.M}x{code.N}, {code.n_edges} edges, t_H={t}")


if __name__ == "__main__":
    main()
