class Registry {
  static instances = [];

  static register(item) {
    Registry.instances.push(item);
  }

  static async flush() {
    Registry.instances = [];
  }
}
