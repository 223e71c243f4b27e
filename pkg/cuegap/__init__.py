import json
import logging
import sys
import traceback
from typing import List, Optional

from cuegap.common import DataError, NumericalError, UserError

logger = logging.getLogger("cuegap")

__version__ = "1.0.0"

EXIT_INTERRUPTED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def error(msg: str, status: int) -> int:
    msg = "ERROR: " + msg
    print(msg, file=sys.stderr)

    return status


def main(raw_args: Optional[List[str]] = None) -> int:
    from cuegap import parser
    from cuegap.session import RunConfig, Session

    args = parser.parse_arguments(raw_args)

    if args.verbose:
        logging_level = logging.DEBUG
    elif args.quiet:
        logging_level = logging.ERROR
    else:
        logging_level = logging.INFO

    logger.setLevel(logging_level)
    logger.propagate = True
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(logging_level)
    logger.addHandler(console_handler)

    args_dict = vars(args)

    try:
        config = RunConfig.from_args(args)
        if config.dry_run:
            print(json.dumps(config.to_json_dict(), indent=2, sort_keys=True, default=str))
            return 0

        session = Session(config, quiet=args.quiet)
        command_handler = getattr(session, args.command.replace("-", "_"))
        command_handler(**args_dict)
    except KeyboardInterrupt:
        return EXIT_INTERRUPTED
    except UserError as e:
        return error(str(e), EXIT_USAGE)
    except NumericalError as e:
        logger.debug(traceback.format_exc())
        return error(str(e), EXIT_NUMERICAL)
    except (DataError, OSError) as e:
        return error(str(e), EXIT_IO)
    except (ValueError, ArithmeticError) as e:
        # got past argument validation
        logger.error(traceback.format_exc())
        return error(f"Internal failure: {e}", EXIT_NUMERICAL)
    finally:
        logger.removeHandler(console_handler)

    return 0
