#!/usr/bin/env python3
"""Build a demo model package (random weights over the byte vocabulary),
optionally install it into a store, and print a catalog entry for it.

Examples:
    python scripts/make_demo_model.py --out demo.tar.gz
    python scripts/make_demo_model.py --out demo.tar.gz --install ~/.local/share/localmt
    python scripts/make_demo_model.py --out demo.tar.gz --catalog-entry http://127.0.0.1:8000/demo.tar.gz
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from localmt.demo import build_demo_package, demo_config  # noqa: E402
from localmt.registry import ModelStore  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="archive path to write (.tar.gz)")
    parser.add_argument("--id", default="demo-en-xx")
    parser.add_argument("--version", default="1.0.0")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--vocab-size", type=int, default=259)
    parser.add_argument("--emb-dim", type=int, default=64)
    parser.add_argument("--layers", type=int, default=2, help="encoder and decoder layers each")
    parser.add_argument("--install", metavar="DATA_DIR", default=None,
                        help="also install into this store directory")
    parser.add_argument("--catalog-entry", metavar="URL", default=None,
                        help="print a catalog JSON document pointing at URL")
    args = parser.parse_args()

    config = demo_config(
        vocab_size=args.vocab_size,
        emb_dim=args.emb_dim,
        enc_layers=args.layers,
        dec_layers=args.layers,
    )
    out = Path(args.out)
    sha = build_demo_package(out, model_id=args.id, version=args.version,
                             seed=args.seed, config=config)
    size = out.stat().st_size
    print(f"wrote {out} ({size / 2**20:.2f} MiB)\nsha256 {sha}", file=sys.stderr)

    if args.install:
        store = ModelStore(args.install)
        store.import_archive(out)
        print(f"installed {args.id} into {store.models_dir}", file=sys.stderr)

    if args.catalog_entry:
        doc = {
            "schema": 1,
            "models": [{
                "id": args.id,
                "name": f"Demo model {args.id}",
                "src_lang": "en",
                "trg_lang": "xx",
                "version": args.version,
                "url": args.catalog_entry,
                "sha256": sha,
                "size_bytes": size,
            }],
        }
        print(json.dumps(doc, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
