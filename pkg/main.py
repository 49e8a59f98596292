"""
weaktraj - command line entry point

    python main.py synthesize --config config/standard.json
    python main.py reconstruct --mode legacy
    python main.py compare recon_corrected/ensemble.csv bohm_truth.csv --svg
"""

import sys

from dotenv import load_dotenv

# Load environment variables before settings are first read
load_dotenv()

from src.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
