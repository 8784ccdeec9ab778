# This file is part of soliton_forge.
#
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

from .version import *

# Numerical settings and the zero-curvature engine.
from ._settings import *
from ._grid import *
from ._lines import *
from ._connection import *
from ._solution import *

# Sine-Gordon solutions, transforms and lattices.
from ._sge import *
from ._lattice import *

# Loop-group dressing.
from ._loops import *
from ._dressing import *

# Surface reconstruction.
from ._surfaces import *

# Generalized sine-Gordon and isothermic surfaces.
from ._gsge import *
from ._isothermic import *

# Serialization and the command line.
from ._io import *
from ._config import *
from ._cli import *
