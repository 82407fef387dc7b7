"""Run a Python 2 program on a Python 3 interpreter.

Stand-in for a real 2.7 interpreter on hosts that lack one. The program is
parsed with the 2.x grammar (print/exec statements, backticks, old octal and
`except E, e` forms), translated with lib2to3 and executed. Failures are
reported the way 2.7 reports them: a final `Name: message` line on stderr,
exit status 1, and 2.7 names for errors that 3.x renamed.

Usage: python3 py2compat.py FILE
"""
import sys
import traceback
import warnings

warnings.simplefilter("ignore")

from lib2to3 import pygram, refactor  # noqa: E402
from lib2to3.pgen2 import parse as l2t_parse  # noqa: E402
from lib2to3.pgen2 import tokenize as l2t_tokenize  # noqa: E402


def fail(name, message):
    sys.stderr.write("%s: %s\n" % (name, message) if message else name + "\n")
    sys.stderr.flush()
    sys.exit(1)


def syntax_failure(source, path):
    # 2.x reports indentation problems separately from other syntax errors;
    # the 3.x compiler agrees with it on which is which.
    try:
        compile(source, path, "exec")
    except (IndentationError, TabError) as exc:
        fail("IndentationError", exc.msg)
    except SyntaxError:
        pass
    fail("SyntaxError", "invalid syntax")


# 3.x-only forms the lib2to3 grammar accepts but 2.7 rejects
PY3_ONLY = {
    pygram.python_symbols.star_expr,
    pygram.python_symbols.tname,
    pygram.python_symbols.annassign,
    pygram.python_symbols.async_stmt,
    pygram.python_symbols.async_funcdef,
}


def py3_only(tree):
    for node in tree.pre_order():
        if node.type in PY3_ONLY:
            return True
        if node.type == pygram.python_symbols.global_stmt and node.children[0].value == "nonlocal":
            return True
    return False


def translate(source, path):
    fixers = refactor.get_fixers_from_package("lib2to3.fixes")
    tool = refactor.RefactoringTool(fixers)
    if not source.endswith("\n"):
        source += "\n"
    try:
        tree = tool.refactor_string(source, path)
    except (l2t_parse.ParseError, l2t_tokenize.TokenError, IndentationError, SyntaxError):
        syntax_failure(source, path)
    if py3_only(tree):
        fail("SyntaxError", "invalid syntax")
    return str(tree)


def py2_name(exc):
    name = type(exc).__name__
    if isinstance(exc, ModuleNotFoundError):
        return "ImportError", "No module named %s" % (exc.name or "")
    if isinstance(exc, (FileNotFoundError, IsADirectoryError, PermissionError)):
        return "IOError", str(exc)
    if isinstance(exc, RecursionError):
        return "RuntimeError", "maximum recursion depth exceeded"
    if type(exc).__module__ not in ("builtins", "exceptions"):
        name = type(exc).__module__ + "." + name
    return name, str(exc)


def main():
    if len(sys.argv) != 2:
        sys.stderr.write("usage: py2compat.py FILE\n")
        sys.exit(2)
    path = sys.argv[1]
    with open(path, "rb") as handle:
        raw = handle.read()
    try:
        source = raw.decode("utf-8")
    except UnicodeDecodeError:
        source = raw.decode("latin-1")
    program = translate(source, path)
    try:
        code = compile(program, path, "exec")
    except (IndentationError, TabError) as exc:
        fail("IndentationError", exc.msg)
    except SyntaxError as exc:
        fail("SyntaxError", exc.msg)

    sys.argv = [path]
    scope = {"__name__": "__main__", "__file__": path, "__builtins__": __builtins__}
    try:
        exec(code, scope)
    except SystemExit:
        raise
    except BaseException as exc:  # noqa: B902
        sys.stdout.flush()
        tb = traceback.extract_tb(exc.__traceback__)[1:]
        sys.stderr.write("Traceback (most recent call last):\n")
        sys.stderr.write("".join(traceback.format_list(tb)))
        name, message = py2_name(exc)
        fail(name, message)


if __name__ == "__main__":
    main()
