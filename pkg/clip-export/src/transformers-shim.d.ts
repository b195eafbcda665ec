// The real encoder backend is an optional peer dependency, loaded lazily;
// this shorthand declaration keeps the build independent of its presence.
declare module '@xenova/transformers';
