"""Allow memo-qcd to be executable through `python -m memo_qcd`."""
from memo_qcd.cli import main


if __name__ == "__main__":  # pragma: no cover
    main()
