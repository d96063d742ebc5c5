import logging
import sys
from typing import List, Optional

from stablemild.framework import dispatch

_LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format=_LOG_FORMAT)
    return dispatch(
        "stablemild.commands",
        argv=sys.argv if argv is None else argv,
        help="Simulates mild solutions driven by stable noise and checks them against their analytic bounds.",
    )


if __name__ == "__main__":
    sys.exit(main())
