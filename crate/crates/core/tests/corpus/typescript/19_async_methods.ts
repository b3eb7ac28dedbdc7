class Client {
  async connect(): Promise<void> {}

  static async create(): Promise<Client> {
    const c = new Client();
    await c.connect();
    return c;
  }
}
