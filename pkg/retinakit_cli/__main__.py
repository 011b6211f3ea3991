# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import sys

from retinakit_cli.main import cli_main


if __name__ == '__main__':
    sys.exit(cli_main())
