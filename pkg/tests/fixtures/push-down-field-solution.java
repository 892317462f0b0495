public class A {}
public class B extends A {
  protected int f = 1;
  public long t() {
    return f;
  }
}
public class C extends A {
  private int f = 0;
}
