square = lambda x: x * x
add = lambda a, b: a + b


def numbers(n):
    for i in range(n):
        yield i


evens = [x for x in numbers(10) if x % 2 == 0]
index = {k: v for k, v in enumerate(evens)}
