__version__ = '0.1.0'

from .common import *
from .video import *
from .y4m import *
from .siti import *
from .nss import *
from .svr import *
from .tables import *
from .gamevqp import *
from .evalstats import *
from .subjective import *
from .protocol import *
from .config import *
