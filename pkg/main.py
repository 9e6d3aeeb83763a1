import sys

from isoplate.cli import main


if __name__ == "__main__":
    sys.exit(main())
