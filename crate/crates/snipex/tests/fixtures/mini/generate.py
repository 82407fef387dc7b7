"""Regenerate the mini corpus dumps and the expected statuses.

Usage: python3 generate.py   (writes next to this file)
"""
import csv
import os

HERE = os.path.dirname(os.path.abspath(__file__))

# (content, py2 status, py3 status)
CASES = [
    ("print 'Hello,World!'", "Success", "SyntaxError"),
    ("print('Hello,World!')", "Success", "Success"),
    ("x = 1\ny = x + 1\nprint(y)", "Success", "Success"),
    ("print(undefined_name)", "NameError", "NameError"),
    ("def f():\nreturn 1", "IndentationError", "IndentationError"),
    ("name = raw_input()\nprint(name)", "EOFError", "NameError"),
    ("x = input()\nprint(x)", "EOFError", "EOFError"),
    ("total = 1 + 'a'", "TypeError", "TypeError"),
    ("with open('missing_file.txt') as f:\n    print(f.read())", "IOError", "FileNotFoundError"),
    ("import zzqy_no_such_pkg\nzzqy_no_such_pkg.run()", "ImportError", "ModuleNotFoundError"),
    ("while True:\n    pass", "Timeout", "Timeout"),
    ("import sys\nprint('bad input')\nsys.exit(3)", "ExitCodeException", "ExitCodeException"),
    ("class MyErr(Exception):\n    pass\n\nraise MyErr('boom')", "UnknownError", "UnknownError"),
    (">>> 1 + 1\n2", "SyntaxError", "SyntaxError"),
    ("$ pip install requests", "SyntaxError", "SyntaxError"),
    ("[1, 2, 3]", "Success", "Success"),
    ("Hello World", "SyntaxError", "SyntaxError"),
    ("d = {}\nd['k']", "KeyError", "KeyError"),
    ("items = [1, 2]\nprint(items[5])", "IndexError", "IndexError"),
    ("ratio = 1 / 0", "ZeroDivisionError", "ZeroDivisionError"),
    ("n = int('x')", "ValueError", "ValueError"),
    ("value = None\nvalue.foo()", "AttributeError", "AttributeError"),
    ("print 1/2", "Success", "SyntaxError"),
    ('exec "x = 1"\nprint x', "Success", "SyntaxError"),
    ("mode = 0777\nprint(mode)", "Success", "SyntaxError"),
    ("try:\n    x = 1\nexcept Exception, e:\n    pass", "Success", "SyntaxError"),
    ("print(b'abc'.decode())", "Success", "Success"),
    ("d = {'a': 1}\nprint(d.has_key('a'))", "Success", "AttributeError"),
    ("for i in xrange(3):\n    print(i)", "Success", "NameError"),
    ("s = unicode('x')\nprint(s)", "Success", "NameError"),
    ("s = u'abc'\nprint(s.upper())", "Success", "Success"),
    ("import os\nprint(os.path.join('a', 'b'))", "Success", "Success"),
    ("import json\nprint(json.dumps({'a': [1, 2]}))", "Success", "Success"),
    ("import collections\nc = collections.Counter('hello')\nprint(c.most_common(1))", "Success", "Success"),
    ("def add(a, b):\n    return a + b\n\nprint(add(2, 3))", "Success", "Success"),
    ("def f():\n    x = 1\n    def g():\n        nonlocal x\n        x = 2\n    g()\n    return x\n\nprint(f())", "SyntaxError", "Success"),
    ("a, *b = [1, 2, 3]\nprint(b)", "SyntaxError", "Success"),
    ("for i in range(3):\n    print(i, end=' ')", "SyntaxError", "Success"),
    ("import sys\nprint(sys.maxint)", "Success", "AttributeError"),
    ("if 1 &lt; 2:\n    print('yes')", "Success", "Success"),
    ("    x = 5\n    print(x * 2)", "Success", "Success"),
    ("assert 1 == 2, 'numbers differ'", "AssertionError", "AssertionError"),
    ("import re\nm = re.match(r'(\\d+)', 'abc')\nprint(m.group(1))", "AttributeError", "AttributeError"),
    ("x = [1, 2, 3]\nprint(x[1:])", "Success", "Success"),
    ("lst = [1, 2]\nlst.push(3)", "AttributeError", "AttributeError"),
    ("import urllib2\nprint(urllib2.Request('http://example.com').get_method())", "Success", "ModuleNotFoundError"),
    ("pip install numpy", "SyntaxError", "SyntaxError"),
    ("python script.py", "SyntaxError", "SyntaxError"),
    ("result = sorted(d.items(), key=lambda x: x[1])", "NameError", "NameError"),
    ("from __future__ import print_function\nprint('a', 'b', sep='-')", "Success", "Success"),
    ("import time\ntime.sleep(0.1)\nprint('done')", "Success", "Success"),
    (">>> import os", "SyntaxError", "SyntaxError"),
    ("ls -la", "NameError", "NameError"),
    ("TypeError: unsupported operand", "SyntaxError", "SyntaxError"),
    ("def fact(n):\n    return 1 if n &lt;= 1 else n * fact(n - 1)\n\nprint(fact(5))", "Success", "Success"),
    ("class Point(object):\n    def __init__(self, x):\n        self.x = x\n\np = Point(3)\nprint(p.x)", "Success", "Success"),
    ("words = 'a b c'.split()\nprint(len(words))", "Success", "Success"),
    ("True", "Success", "Success"),
]

YEARS = [2009, 2011, 2013, 2015, 2017]


def main():
    posts = [["Id", "PostTypeId", "ParentId", "AcceptedAnswerId", "CreationDate", "Score", "Tags"]]
    blocks = [["Id", "PostId", "PostBlockTypeId", "RootPostBlockVersionId", "LineCount", "Length", "Content"]]
    refs = [["PostId", "Url"]]
    expected = [["snippet_id", "py2", "py3"]]

    # one question per five answers; every third answer is accepted
    post_id = 100
    block_id = 5000
    question = None
    for i, (content, py2, py3) in enumerate(CASES):
        year = YEARS[i % len(YEARS)]
        if i % 5 == 0:
            post_id += 1
            question = post_id
            accepted = question + 1 if i % 3 == 0 else ""
            posts.append([question, 1, "", accepted, "%d-03-0%dT10:00:00.000" % (year, 1 + i % 9), i % 7, "<python>"])
            block_id += 1
            blocks.append([block_id, question, 1, block_id, 1, 20, "How do I do this?"])
        post_id += 1
        answer = post_id
        posts.append([answer, 2, question, "", "%d-06-1%dT12:30:00.000" % (year, i % 10), (i * 3) % 11 - 2, ""])
        # prose around the code is dropped
        block_id += 1
        blocks.append([block_id, answer, 1, block_id, 1, 12, "Try this:"])
        block_id += 1
        root = block_id
        if i % 9 == 4:
            # an older version of the same block precedes the final one
            blocks.append([block_id, answer, 2, root, 1, 10, "print 'draft'"])
            block_id += 1
        blocks.append([block_id, answer, 2, root, content.count("\n") + 1, len(content), content])
        expected.append([block_id, py2, py3])
        if i % 4 == 1:
            refs.append([answer, "https://github.com/example/repo%d/blob/master/a.py" % i])

    # a question with a second tag is out of scope, and so are its answers
    post_id += 1
    posts.append([post_id, 1, "", "", "2014-01-01T00:00:00.000", 1, "<python><numpy>"])
    post_id += 1
    posts.append([post_id, 2, post_id - 1, "", "2014-01-02T00:00:00.000", 1, ""])
    block_id += 1
    blocks.append([block_id, post_id, 2, block_id, 1, 12, "print('skip')"])
    # an answer whose question is not in the dump
    post_id += 1
    posts.append([post_id, 2, 99999, "", "2014-01-02T00:00:00.000", 1, ""])
    block_id += 1
    blocks.append([block_id, post_id, 2, block_id, 1, 13, "print('orphan')"])

    for name, rows in [("Posts.csv", posts), ("PostBlockVersion.csv", blocks),
                       ("refs.csv", refs), ("expected.csv", expected)]:
        with open(os.path.join(HERE, name), "w", newline="") as handle:
            csv.writer(handle).writerows(rows)


if __name__ == "__main__":
    main()
