# -*- coding: utf-8 -*-
# @Time    : 2024/9/20 12:02
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : __init__.py
