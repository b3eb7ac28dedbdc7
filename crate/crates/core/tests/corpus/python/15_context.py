from contextlib import contextmanager


@contextmanager
def opened(path, mode="r"):
    handle = open(path, mode)
    try:
        yield handle
    finally:
        handle.close()
