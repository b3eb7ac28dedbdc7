def connect(host, port=5432, *, user: str, password: str = "", **options):
    return (host, port, user, password, options)


handlers = {name: (lambda: name) for name in ["a", "b"]}
