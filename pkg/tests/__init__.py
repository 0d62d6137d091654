# -*- coding: utf-8 -*-
# @Time    : 2024/8/29 17:09
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : __init__.py
