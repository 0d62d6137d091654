# -*- coding: utf-8 -*-
# @Time    : 2024/9/20 11:20
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : setup.py

from setuptools import setup

setup()
