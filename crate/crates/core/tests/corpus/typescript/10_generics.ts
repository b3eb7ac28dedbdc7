function identity<T>(value: T): T {
  return value;
}

class Box<T> {
  constructor(public value: T) {}

  map<U>(fn: (v: T) => U): Box<U> {
    return new Box(fn(this.value));
  }
}
