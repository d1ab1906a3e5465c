"""Command-line front end: one flag per ExtractionJob field.

Exits 0 on success with one line per file written, 2 with a message on
stderr for any resolution or validation failure.
"""

import argparse
import sys

from .errors import ExtractError
from .extract import DEFAULT_PROMPT, ExtractionJob, extract


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="rail-extract",
        description="dump image and class-text embeddings for one dataset",
    )
    parser.add_argument("--dataset", required=True,
                        help="dataset directory or $RAIL_DATASETS entry")
    parser.add_argument("--model", required=True,
                        help="encoder id: fake:<dim> or clip:<model id>")
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--prompt-template", default=DEFAULT_PROMPT,
                        help="class name replaces {} (default %(default)r)")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-per-class", type=int, default=None,
                        help="embed at most this many images per class "
                             "and split")
    args = parser.parse_args(argv)

    try:
        job = ExtractionJob(
            dataset=args.dataset,
            model=args.model,
            out_dir=args.out_dir,
            prompt_template=args.prompt_template,
            batch_size=args.batch_size,
            device=args.device,
            max_per_class=args.max_per_class,
        )
        result = extract(job)
    except (ExtractError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    print(f"wrote {result.text_table}: text table "
          f"classes={len(result.class_names)}")
    for role in sorted(result.files):
        print(f"wrote {result.files[role]}: role={role} "
              f"n={result.counts[role]} classes={len(result.class_names)}")
    return 0


def entry():
    raise SystemExit(main())
