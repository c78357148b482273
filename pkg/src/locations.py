import logging
import sys
from pathlib import Path
from datetime import datetime

LOG_FORMAT = '%(levelname)-7s %(name)s: %(message)s'

def log_header():
    header = ''
    header += 'Log file initiated at {}.\n'.format(datetime.now().isoformat())
    header += 50 * '-'
    header += '\n\n'
    return header

RELATIVE_PATH = Path(__file__).parents[1]

SCENARIOS = RELATIVE_PATH / 'scenarios'

def setup_logging(verbosity=0, logfile=None):
    level = max(logging.DEBUG, logging.WARNING - 10 * verbosity)
    handlers = [logging.StreamHandler(sys.stderr)]
    if logfile is not None:
        with open(logfile, 'w') as file:
            file.write(log_header())
        handlers.append(logging.FileHandler(logfile, mode='a'))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)
    return level
